use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use super::outcome::ridge_solve;
use crate::bridges::{BridgeSampler, ScheduleKind, Source};
use crate::config::{Optimizer, RunConfig};
use crate::data::{Dataset, TreatmentKind};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, TBasis};
use crate::losses::{dsm_quad_form, dsm_risk, tsm_quad_form, two_sided_tsm_risk, DsmSettings, TimeDistribution, TsmSettings, WeightFn};
use crate::riesz::{
    riesz_ame_bridge, riesz_ame_dsm, riesz_ape, riesz_ate_direct, riesz_ate_logistic, Quadrature, RieszBasis,
    RieszEstimate,
};
use crate::rng::Rng;
use crate::score_model::{LinearScoreModel, ScoreModel};
use crate::stats::quantile;
use crate::synth::OracleBundle;
use crate::training::{closed_form_fit, train, HistoryEntry};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Functional {
    Ate,
    Ame,
    Ape,
}

impl Functional {
    pub fn treatment_kind(self) -> TreatmentKind {
        match self {
            Functional::Ate => TreatmentKind::Binary,
            Functional::Ame | Functional::Ape => TreatmentKind::Continuous,
        }
    }
}

/// How the representer (and, for oracle runs, the outcome regression) is
/// obtained on each training split.
#[derive(Debug, Clone, PartialEq)]
pub enum Method {
    AteTsm,
    AteLogistic,
    AmeBridge,
    AmeDsm,
    /// Policies `p₀(x ∓ shift)`.
    ApeTsm { shift: Vec<f64> },
    AteLsif,
    AmeLsif,
    /// Known `α₀` and `γ₀`; nothing is trained.
    Oracle(Box<OracleBundle>),
}

impl Method {
    pub fn functional(&self) -> Functional {
        match self {
            Method::AteTsm | Method::AteLogistic | Method::AteLsif => Functional::Ate,
            Method::AmeBridge | Method::AmeDsm | Method::AmeLsif => Functional::Ame,
            Method::ApeTsm { .. } => Functional::Ape,
            Method::Oracle(o) => match o.spec {
                crate::synth::DgpSpec::AteGaussMix { .. } => Functional::Ate,
                crate::synth::DgpSpec::AmeGaussCond { .. } => Functional::Ame,
                crate::synth::DgpSpec::ApeGaussShift { .. } => Functional::Ape,
            },
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Method::AteTsm => "ate-tsm",
            Method::AteLogistic => "ate-logistic",
            Method::AmeBridge => "ame-bridge",
            Method::AmeDsm => "ame-dsm",
            Method::ApeTsm { .. } => "ape-tsm",
            Method::AteLsif => "ate-lsif",
            Method::AmeLsif => "ame-lsif",
            Method::Oracle(_) => "oracle",
        }
    }

    /// Parse a method name; `ape-tsm` shifts every coordinate by `shift`.
    pub fn parse(name: &str, dim: usize, shift: f64) -> Result<Self> {
        Ok(match name {
            "ate-tsm" => Method::AteTsm,
            "ate-logistic" => Method::AteLogistic,
            "ame-bridge" => Method::AmeBridge,
            "ame-dsm" => Method::AmeDsm,
            "ape-tsm" => Method::ApeTsm { shift: vec![shift; dim] },
            "ate-lsif" => Method::AteLsif,
            "ame-lsif" => Method::AmeLsif,
            other => return Err(Error::Validation(format!("unknown method {other:?}"))),
        })
    }
}

fn rows_of(ds: &Dataset, rows: &[usize], with_d: bool) -> Vec<f64> {
    let mut out = Vec::with_capacity(rows.len() * (ds.dz() + 1));
    for &i in rows {
        if with_d {
            out.push(ds.d(i));
        }
        out.extend_from_slice(ds.z(i));
    }
    out
}

fn split_legendre(cfg: &RunConfig, eps: f64, default_degree: usize) -> TBasis {
    TBasis::Legendre { degree: cfg.time_degree.unwrap_or(default_degree), lo: 0.0, hi: 1.0 - eps }
}

fn tsm_settings(cfg: &RunConfig) -> TsmSettings {
    TsmSettings { lambda: WeightFn::from_kind(cfg.lambda_kind, true), control_variate: cfg.control_variate }
}

/// A trained score model and its loss trace (empty for closed-form fits).
#[derive(Debug, Clone)]
pub struct FittedScore {
    pub model: Arc<dyn ScoreModel>,
    pub history: Vec<HistoryEntry>,
}

fn closed(model: LinearScoreModel) -> FittedScore {
    FittedScore { model: Arc::new(model), history: Vec::new() }
}

struct BridgeFit {
    x_dim: usize,
    x_degree: usize,
    t: TBasis,
    eps: f64,
    mc_samples: usize,
}

impl BridgeFit {
    fn standard(x_dim: usize, cfg: &RunConfig, default_t_degree: usize) -> Self {
        let eps = cfg.t_truncation;
        let t = split_legendre(cfg, eps, default_t_degree);
        Self { x_dim, x_degree: cfg.x_degree, t, eps, mc_samples: cfg.mc_samples }
    }
}

fn fit_bridge(sampler: &BridgeSampler, fit: BridgeFit, cfg: &RunConfig, seed: u64) -> Result<FittedScore> {
    let BridgeFit { x_dim, x_degree, t, eps, mc_samples } = fit;
    let features = FeatureMap::polynomial(x_dim, x_degree, t, true)?;
    let set = tsm_settings(cfg);
    let time = TimeDistribution::two_sided(eps);
    match cfg.optimizer {
        Optimizer::ClosedForm => {
            let q = tsm_quad_form(&features, sampler, &set, &time, mc_samples, seed)?;
            Ok(closed(closed_form_fit(&features, &q, cfg.ridge)?))
        }
        Optimizer::Adam => {
            let mut model = LinearScoreModel::zeros(features);
            let state = train(&mut model, cfg, &mut Rng::new(seed), |m, rng| {
                let r = two_sided_tsm_risk(m, sampler, &set, &time, cfg.batch_size, rng)?;
                Ok((r.loss, r.grad))
            })?;
            Ok(FittedScore { model: Arc::new(model), history: state.history })
        }
    }
}

/// Score model on the two-sided treatment bridge over `z`: base law the
/// pooled covariates, outer laws the covariates of each arm.
pub fn fit_ate_bridge(ds: &Dataset, rows: &[usize], cfg: &RunConfig, seed: u64) -> Result<FittedScore> {
    let dz = ds.dz();
    if dz == 0 {
        return Err(Error::Validation("the treatment bridge needs at least one covariate".into()));
    }
    let arm = |a: f64| -> Vec<usize> { rows.iter().copied().filter(|&i| ds.d(i) == a).collect() };
    let (treated, control) = (arm(1.0), arm(-1.0));
    if treated.is_empty() || control.is_empty() {
        return Err(Error::DegenerateArm(treated.len() as f64 / rows.len().max(1) as f64));
    }
    let sampler = BridgeSampler::two_sided(
        ScheduleKind::TwoSidedAbs,
        Source::empirical(rows_of(ds, rows, false), dz)?,
        Source::empirical(rows_of(ds, &treated, false), dz)?,
        Source::empirical(rows_of(ds, &control, false), dz)?,
    )?;
    fit_bridge(&sampler, BridgeFit::standard(dz, cfg, 3), cfg, seed)
}

/// Score model on the marginal-effect bridge over `(d, z)`.
pub fn fit_ame_bridge(ds: &Dataset, rows: &[usize], cfg: &RunConfig, seed: u64) -> Result<FittedScore> {
    let sampler = BridgeSampler::ame(Source::empirical(rows_of(ds, rows, true), ds.dz() + 1)?)?;
    let eps = cfg.ame_t_truncation;
    let fit = BridgeFit {
        x_dim: ds.dz() + 1,
        x_degree: cfg.ame_x_degree,
        t: split_legendre(cfg, eps, 3),
        eps,
        mc_samples: cfg.ame_mc_samples,
    };
    fit_bridge(&sampler, fit, cfg, seed)
}

/// Score model on the two-sided policy bridge from `p₀` to the shifted laws
/// `p₀(· - pos)` at `t = 1` and `p₀(· - neg)` at `t = -1`.
/// Both outer endpoints of a path reuse one row.
pub fn fit_ape_bridge(
    ds: &Dataset,
    rows: &[usize],
    pos: &[f64],
    neg: &[f64],
    cfg: &RunConfig,
    seed: u64,
) -> Result<FittedScore> {
    let dim = ds.dz() + 1;
    for shift in [pos, neg] {
        if shift.len() != dim {
            return Err(Error::Validation(format!("policy shift has {} entries, expected {dim}", shift.len())));
        }
    }
    let base = Source::empirical(rows_of(ds, rows, true), dim)?;
    let sampler =
        BridgeSampler::two_sided(ScheduleKind::TwoSidedAbs, base.clone(), base.shifted(pos), base.shifted(neg))?
            .with_coupling(true);
    fit_bridge(&sampler, BridgeFit::standard(dim, cfg, 3), cfg, seed)
}

/// Denoising score model over `(d̃, z, σ)`.
pub fn fit_dsm(ds: &Dataset, rows: &[usize], cfg: &RunConfig, seed: u64) -> Result<FittedScore> {
    let sub = ds.subset(rows)?;
    let features = FeatureMap::polynomial(
        ds.dz() + 1,
        cfg.x_degree,
        TBasis::Legendre { degree: cfg.time_degree.unwrap_or(3), lo: cfg.sigma_min, hi: cfg.sigma_max },
        false,
    )?;
    let set = DsmSettings::new(cfg.sigma_min, cfg.sigma_max);
    match cfg.optimizer {
        Optimizer::ClosedForm => {
            let q = dsm_quad_form(&features, &sub, &set, cfg.dsm_reps, seed)?;
            Ok(closed(closed_form_fit(&features, &q, cfg.ridge)?))
        }
        Optimizer::Adam => {
            let mut model = LinearScoreModel::zeros(features);
            let state = train(&mut model, cfg, &mut Rng::new(seed), |m, rng| {
                let r = dsm_risk(m, &sub, &set, cfg.batch_size, rng)?;
                Ok((r.loss, r.grad))
            })?;
            Ok(FittedScore { model: Arc::new(model), history: state.history })
        }
    }
}

/// Least-squares Riesz regression: minimise `E[α²] - 2 E[m(W, α)] + ridge |w|²`
/// over `α = wᵀφ`, in closed form.
pub fn riesz_regression_baseline(
    ds: &Dataset,
    rows: &[usize],
    functional: Functional,
    basis: RieszBasis,
    ridge: f64,
) -> Result<RieszEstimate> {
    if functional == Functional::Ape {
        return Err(Error::Validation("the least-squares baseline covers ATE and AME only".into()));
    }
    if ds.kind() != functional.treatment_kind() {
        return Err(Error::Validation(format!("{functional:?} does not match a {:?} treatment", ds.kind())));
    }
    if rows.is_empty() {
        return Err(Error::Validation("empty training split".into()));
    }
    let p = basis.len();
    let mut gram = DMatrix::<f64>::zeros(p, p);
    let mut h = DVector::<f64>::zeros(p);
    for &i in rows {
        let x = ds.x(i);
        let (phi, dphi) = basis.eval(&x);
        let v = DVector::from_vec(phi);
        gram.ger(1.0, &v, &v, 1.0);
        let m = match functional {
            Functional::Ate => {
                let mut x1 = x.clone();
                x1[0] = 1.0;
                let mut x0 = x;
                x0[0] = -1.0;
                let (a, _) = basis.eval(&x1);
                let (b, _) = basis.eval(&x0);
                DVector::from_iterator(p, a.iter().zip(&b).map(|(u, v)| u - v))
            }
            _ => DVector::from_vec(dphi),
        };
        h += m;
    }
    let n = rows.len() as f64;
    let w = ridge_solve(gram / n, h / n, ridge)?;
    RieszEstimate::linear(basis, w)
}

/// Train the representer of `method` on `rows`.
pub fn fit_representer(ds: &Dataset, rows: &[usize], method: &Method, cfg: &RunConfig, seed: u64) -> Result<RieszEstimate> {
    fit_representer_traced(ds, rows, method, cfg, seed).map(|(a, _)| a)
}

/// [`fit_representer`] together with the training history of the score model.
pub fn fit_representer_traced(
    ds: &Dataset,
    rows: &[usize],
    method: &Method,
    cfg: &RunConfig,
    seed: u64,
) -> Result<(RieszEstimate, Vec<HistoryEntry>)> {
    let mut history = Vec::new();
    let mut keep = |f: FittedScore| {
        history = f.history;
        f.model
    };
    let quad = || Quadrature::truncated(cfg.quadrature_points, cfg.t_truncation);
    let pi_hat = || {
        let treated = rows.iter().filter(|&&i| ds.d(i) == 1.0).count();
        treated as f64 / rows.len().max(1) as f64
    };
    let alpha = match method {
        Method::AteTsm => riesz_ate_direct(keep(fit_ate_bridge(ds, rows, cfg, seed)?), pi_hat(), quad()?)?
            .with_trim(cfg.propensity_trim),
        Method::AteLogistic => riesz_ate_logistic(keep(fit_ate_bridge(ds, rows, cfg, seed)?), pi_hat(), quad()?)?
            .with_trim(cfg.propensity_trim),
        Method::AmeBridge => Ok(riesz_ame_bridge(keep(fit_ame_bridge(ds, rows, cfg, seed)?))),
        Method::AmeDsm => riesz_ame_dsm(keep(fit_dsm(ds, rows, cfg, seed)?), cfg.sigma_min),
        Method::ApeTsm { shift } => {
            let neg: Vec<f64> = shift.iter().map(|s| -s).collect();
            Ok(riesz_ape(keep(fit_ape_bridge(ds, rows, shift, &neg, cfg, seed)?), quad()?))
        }
        Method::AteLsif => riesz_regression_baseline(
            ds,
            rows,
            Functional::Ate,
            RieszBasis::ArmPolynomial { dz: ds.dz(), degree: cfg.x_degree },
            cfg.ridge,
        ),
        Method::AmeLsif => riesz_regression_baseline(
            ds,
            rows,
            Functional::Ame,
            RieszBasis::Polynomial {
                features: FeatureMap::polynomial(ds.dz() + 1, cfg.x_degree, TBasis::Monomial { degree: 0 }, false)?,
            },
            cfg.ridge,
        ),
        Method::Oracle(o) => {
            let o = o.clone();
            Ok(RieszEstimate::oracle(move |x| o.alpha0(x)))
        }
    }?;
    let alpha = match method {
        Method::AteLsif | Method::AmeLsif | Method::Oracle(_) => alpha,
        _ => alpha.with_support(support_box(ds, rows, cfg.support_quantile)),
    };
    Ok((alpha, history))
}

/// Per-coordinate `[q, 1 - q]` quantile ranges of `x = (d, z)` over `rows`.
pub fn support_box(ds: &Dataset, rows: &[usize], q: f64) -> Vec<(f64, f64)> {
    (0..=ds.dz())
        .map(|k| {
            let col: Vec<f64> = rows.iter().map(|&i| if k == 0 { ds.d(i) } else { ds.z(i)[k - 1] }).collect();
            (quantile(&col, q), quantile(&col, 1.0 - q))
        })
        .collect()
}

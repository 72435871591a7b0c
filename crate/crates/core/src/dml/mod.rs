//! Cross-fitted estimation with the orthogonal score
//! `ψ = α(x)(y - γ(x)) + m(W, γ) - θ`.

mod outcome;
mod recipe;

pub use outcome::{fit_outcome, outcome_basis, OutcomeModel};
pub use recipe::{
    fit_ame_bridge, fit_ape_bridge, fit_ate_bridge, fit_dsm, fit_representer, fit_representer_traced,
    riesz_regression_baseline, FittedScore, Functional, Method,
};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::data::Dataset;
use crate::error::{Error, Result};
use crate::par;
use crate::riesz::RieszEstimate;
use crate::rng::Rng;
use crate::score_model::Checkpoint;
use crate::synth::OracleBundle;
use crate::training::HistoryEntry;

const Z95: f64 = 1.96;
const FOLD_STREAM: u64 = 0xF01D;

/// Random partition of `0..n` into `k` folds whose sizes differ by at most one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldPlan {
    pub assignment: Vec<usize>,
    pub k: usize,
    pub seed: u64,
}

impl FoldPlan {
    pub fn new(n: usize, k: usize, seed: u64) -> Result<Self> {
        if k < 2 {
            return Err(Error::Validation(format!("need at least 2 folds, got {k}")));
        }
        let mut perm: Vec<usize> = (0..n).collect();
        Rng::stream(seed, FOLD_STREAM).shuffle(&mut perm);
        let mut assignment = vec![0; n];
        for (pos, &i) in perm.iter().enumerate() {
            assignment[i] = pos % k;
        }
        Ok(Self { assignment, k, seed })
    }

    /// Held-out rows of fold `f`, in index order.
    pub fn fold(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] == f).collect()
    }

    /// Training rows of fold `f`.
    pub fn complement(&self, f: usize) -> Vec<usize> {
        (0..self.assignment.len()).filter(|&i| self.assignment[i] != f).collect()
    }
}

/// Outcome regression used in the score.
#[derive(Debug, Clone)]
pub enum Gamma {
    Fitted(OutcomeModel),
    Oracle(Box<OracleBundle>),
}

impl Gamma {
    pub fn value(&self, x: &[f64]) -> f64 {
        match self {
            Gamma::Fitted(m) => m.value(x),
            Gamma::Oracle(o) => o.gamma0(x[0], &x[1..]),
        }
    }

    pub fn d_value(&self, x: &[f64]) -> f64 {
        match self {
            Gamma::Fitted(m) => m.d_value(x),
            Gamma::Oracle(o) => o.dgamma0(x[0], &x[1..]),
        }
    }
}

/// `m(W, γ)`: `γ(1, z) - γ(-1, z)`, `∂_d γ(d, z)` or `γ(x) α̂(x)`.
pub fn m_functional(functional: Functional, gamma: &Gamma, x: &[f64], alpha: Option<f64>) -> Result<f64> {
    match functional {
        Functional::Ate => {
            let mut v = x.to_vec();
            v[0] = 1.0;
            let up = gamma.value(&v);
            v[0] = -1.0;
            Ok(up - gamma.value(&v))
        }
        Functional::Ame => Ok(gamma.d_value(x)),
        Functional::Ape => alpha
            .map(|a| gamma.value(x) * a)
            .ok_or_else(|| Error::Validation("the policy functional needs the representer value".into())),
    }
}

/// `ψ = α (y - γ(x)) + m - θ`.
pub fn orthogonal_score(alpha: f64, gamma_x: f64, y: f64, m: f64, theta: f64) -> f64 {
    alpha * (y - gamma_x) + m - theta
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FoldDiagnostics {
    pub fold: usize,
    pub train_size: usize,
    pub eval_size: usize,
    /// Mean of `α̂(y - γ̂) + m` over the held-out rows.
    pub theta_fold: f64,
    pub alpha_mean: f64,
    pub alpha_max_abs: f64,
    pub clipped_propensities: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EstimateReport {
    pub theta_hat: f64,
    pub variance_hat: f64,
    pub se: f64,
    pub ci_lower: f64,
    pub ci_upper: f64,
    pub n: usize,
    pub folds: Vec<FoldDiagnostics>,
    pub method: String,
    pub clipped_propensities: u64,
}

impl EstimateReport {
    /// Report with `V̂ = n se²` and a 95% normal interval.
    pub fn new(theta_hat: f64, se: f64, n: usize, method: impl Into<String>, folds: Vec<FoldDiagnostics>) -> Self {
        let clipped = folds.iter().map(|f| f.clipped_propensities).sum();
        Self {
            theta_hat,
            variance_hat: se * se * n as f64,
            se,
            ci_lower: theta_hat - Z95 * se,
            ci_upper: theta_hat + Z95 * se,
            n,
            folds,
            method: method.into(),
            clipped_propensities: clipped,
        }
    }

    fn from_variance(theta_hat: f64, variance_hat: f64, n: usize, method: &str, folds: Vec<FoldDiagnostics>) -> Self {
        let mut r = Self::new(theta_hat, (variance_hat / n as f64).sqrt(), n, method, folds);
        r.variance_hat = variance_hat;
        r
    }

    pub fn check_finite(&self) -> Result<()> {
        let vals = [self.theta_hat, self.variance_hat, self.se, self.ci_lower, self.ci_upper];
        if vals.iter().all(|v| v.is_finite()) {
            Ok(())
        } else {
            Err(Error::Validation(format!("report is not finite: theta_hat={}, se={}", self.theta_hat, self.se)))
        }
    }

    pub fn covers(&self, theta: f64) -> bool {
        self.ci_lower <= theta && theta <= self.ci_upper
    }
}

/// Trained score model of one fold.
#[derive(Debug, Clone)]
pub struct FoldArtifacts {
    pub checkpoint: Option<Checkpoint>,
    pub history: Vec<HistoryEntry>,
}

/// Report plus the per-row score `ψ̂ᵢ(θ̂)` and per-fold artifacts.
#[derive(Debug, Clone)]
pub struct CrossFit {
    pub report: EstimateReport,
    pub psi: Vec<f64>,
    pub artifacts: Vec<FoldArtifacts>,
}

/// Nuisances for one training split.
pub struct Nuisances {
    pub alpha: RieszEstimate,
    pub gamma: Gamma,
    pub history: Vec<HistoryEntry>,
}

/// Train `α̂` and `γ̂` on `rows`.
pub fn fit_nuisances(ds: &Dataset, rows: &[usize], method: &Method, cfg: &RunConfig, seed: u64) -> Result<Nuisances> {
    let gamma = match method {
        Method::Oracle(o) => Gamma::Oracle(o.clone()),
        _ => Gamma::Fitted(fit_outcome(ds, rows, outcome_basis(ds.kind(), ds.dz(), cfg.x_degree)?, cfg.ridge)?),
    };
    let (alpha, history) = recipe::fit_representer_traced(ds, rows, method, cfg, seed)?;
    Ok(Nuisances { alpha, gamma, history })
}

fn min_train(ds: &Dataset, cfg: &RunConfig) -> Result<usize> {
    Ok(outcome_basis(ds.kind(), ds.dz(), cfg.x_degree)?.len() + 1)
}

/// `θ̂ = (1/n) Σ [α̂(Xᵢ)(Yᵢ - γ̂(Xᵢ)) + m(Wᵢ, γ̂)]` with nuisances of row `i`
/// trained on the folds that exclude it, and `V̂ = (1/n) Σ ψ̂ᵢ²`.
pub fn cross_fit(ds: &Dataset, method: &Method, cfg: &RunConfig) -> Result<CrossFit> {
    cfg.validate()?;
    let functional = method.functional();
    if ds.kind() != functional.treatment_kind() {
        return Err(Error::Validation(format!(
            "method {} needs a {:?} treatment, data has {:?}",
            method.name(),
            functional.treatment_kind(),
            ds.kind()
        )));
    }
    let n = ds.n();
    let plan = FoldPlan::new(n, cfg.folds, cfg.seed)?;
    let need = min_train(ds, cfg)?;
    for f in 0..plan.k {
        let (eval, train) = (plan.fold(f).len(), n - plan.fold(f).len());
        if eval == 0 || train < need {
            return Err(Error::FoldTooSmall { fold: f, size: train.min(eval), min: need * plan.k / (plan.k - 1) + 1 });
        }
    }
    type FoldOut = (Vec<usize>, Vec<f64>, FoldDiagnostics, FoldArtifacts);
    let fold_results = par::map_indexed(plan.k, |f| -> Result<FoldOut> {
        let train = plan.complement(f);
        let eval = plan.fold(f);
        let nu = fit_nuisances(ds, &train, method, cfg, Rng::stream(cfg.seed, f as u64).next_u64())?;
        let mut parts = Vec::with_capacity(eval.len());
        let (mut asum, mut amax) = (0.0, 0.0f64);
        for &i in &eval {
            let x = ds.x(i);
            let a = nu.alpha.eval(&x)?;
            let g = nu.gamma.value(&x);
            let m = m_functional(functional, &nu.gamma, &x, Some(a))?;
            parts.push(orthogonal_score(a, g, ds.y(i), m, 0.0));
            asum += a;
            amax = amax.max(a.abs());
        }
        let diag = FoldDiagnostics {
            fold: f,
            train_size: train.len(),
            eval_size: eval.len(),
            theta_fold: parts.iter().sum::<f64>() / eval.len() as f64,
            alpha_mean: asum / eval.len() as f64,
            alpha_max_abs: amax,
            clipped_propensities: nu.alpha.clipped(),
        };
        let art = FoldArtifacts { checkpoint: nu.alpha.provenance.checkpoint.clone(), history: nu.history };
        Ok((eval, parts, diag, art))
    });
    let mut comp = vec![0.0; n];
    let mut folds = Vec::with_capacity(plan.k);
    let mut artifacts = Vec::with_capacity(plan.k);
    for r in fold_results {
        let (rows, parts, diag, art) = r?;
        artifacts.push(art);
        for (i, v) in rows.into_iter().zip(parts) {
            comp[i] = v;
        }
        folds.push(diag);
    }
    let theta = comp.iter().sum::<f64>() / n as f64;
    let psi: Vec<f64> = comp.iter().map(|c| c - theta).collect();
    let var = psi.iter().map(|p| p * p).sum::<f64>() / n as f64;
    let report = EstimateReport::from_variance(theta, var, n, method.name(), folds);
    report.check_finite()?;
    Ok(CrossFit { report, psi, artifacts })
}

pub fn cross_fit_estimate(ds: &Dataset, method: &Method, cfg: &RunConfig) -> Result<EstimateReport> {
    cross_fit(ds, method, cfg).map(|c| c.report)
}

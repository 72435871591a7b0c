//! Riesz representers built from trained score models.

use std::path::Path;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::par;
use crate::score_model::{Checkpoint, ScoreModel};
use crate::stats::{logit, sigmoid};

/// Composite trapezoid rule with `points` nodes. When `clamp` is set, node
/// times are clamped into it before the integrand is read, so a model trained
/// on a truncated time range is held constant beyond it.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Quadrature {
    pub points: usize,
    pub clamp: Option<(f64, f64)>,
}

impl Quadrature {
    pub fn new(points: usize, clamp: Option<(f64, f64)>) -> Result<Self> {
        if points < 3 || points % 2 == 0 {
            return Err(Error::Validation(format!("quadrature needs an odd number >= 3 of points, got {points}")));
        }
        Ok(Self { points, clamp })
    }

    /// Trapezoid on `[-1 + eps, 1 - eps]`-clamped nodes.
    pub fn truncated(points: usize, eps: f64) -> Result<Self> {
        Self::new(points, Some((-(1.0 - eps), 1.0 - eps)))
    }

    /// `∫_a^b f(t) dt`; reversed limits flip the sign. Nodes of an interval
    /// that ends at zero from below are read at `-0`.
    pub fn integrate(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> f64 {
        if a > b {
            return -self.integrate(f, b, a);
        }
        let k = self.points - 1;
        let h = (b - a) / k as f64;
        let negative_side = b <= 0.0 && a < 0.0;
        let mut total = 0.0;
        for i in 0..=k {
            let mut t = if i == k { b } else { a + h * i as f64 };
            if negative_side && t == 0.0 {
                t = -0.0;
            }
            if let Some((lo, hi)) = self.clamp {
                t = t.clamp(lo, hi);
            }
            let wgt = if i == 0 || i == k { 0.5 } else { 1.0 };
            total += wgt * f(t);
        }
        total * h
    }

    /// Integral and the gap to the rule with half as many intervals.
    pub fn integrate_with_error(&self, f: impl Fn(f64) -> f64, a: f64, b: f64) -> (f64, f64) {
        let fine = self.integrate(&f, a, b);
        let coarse = Quadrature { points: (self.points - 1) / 2 + 1, clamp: self.clamp }.integrate(&f, a, b);
        (fine, (fine - coarse).abs())
    }
}

/// `∫_a^b s(x, t) dt` by the trapezoid rule.
pub fn integrate_time_score(model: &dyn ScoreModel, x: &[f64], a: f64, b: f64, quad: &Quadrature) -> f64 {
    quad.integrate(|t| model.eval(x, t), a, b)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RieszMethod {
    AteDirect,
    AteLogistic,
    AmeBridge,
    AmeDsm,
    ApeExp,
    Baseline,
    Oracle,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub method: RieszMethod,
    pub checkpoint: Option<Checkpoint>,
    pub quadrature_points: Option<usize>,
    pub pi_hat: Option<f64>,
    pub sigma_min: Option<f64>,
}

impl Provenance {
    fn new(method: RieszMethod) -> Self {
        Self { method, checkpoint: None, quadrature_points: None, pi_hat: None, sigma_min: None }
    }
}

/// Basis of a representer that is linear in its weights.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum RieszBasis {
    /// `1[d = 1] f(z)` followed by `1[d = -1] f(z)`, `f` polynomial in `z`.
    ArmPolynomial { dz: usize, degree: usize },
    /// `1[d = 1] f(z)` followed by `1[d = -1] f(z)` with
    /// `f = (1, exp(r Σz) for r in rates)`.
    ArmExponential { rates: Vec<f64> },
    /// Polynomial in `(d, z)`.
    Polynomial { features: FeatureMap },
}

impl RieszBasis {
    pub fn len(&self) -> usize {
        match self {
            RieszBasis::ArmPolynomial { dz, degree } => 2 * arm_map(*dz, *degree).len(),
            RieszBasis::ArmExponential { rates } => 2 * (rates.len() + 1),
            RieszBasis::Polynomial { features } => features.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Basis values at `x = (d, z)`, and their `d`-derivatives.
    pub fn eval(&self, x: &[f64]) -> (Vec<f64>, Vec<f64>) {
        match self {
            RieszBasis::ArmPolynomial { .. } | RieszBasis::ArmExponential { .. } => {
                let f = match self {
                    RieszBasis::ArmPolynomial { dz, degree } => arm_map(*dz, *degree).eval(&x[1..], 0.0),
                    RieszBasis::ArmExponential { rates } => {
                        let sz: f64 = x[1..].iter().sum();
                        std::iter::once(1.0).chain(rates.iter().map(|r| (r * sz).exp())).collect()
                    }
                    RieszBasis::Polynomial { .. } => unreachable!(),
                };
                let m = f.len();
                let mut v = vec![0.0; 2 * m];
                if x[0] == 1.0 {
                    v[..m].copy_from_slice(&f);
                } else if x[0] == -1.0 {
                    v[m..].copy_from_slice(&f);
                }
                (v, vec![0.0; 2 * m])
            }
            RieszBasis::Polynomial { features } => {
                let mut dx = vec![0.0; x.len()];
                dx[0] = 1.0;
                features.jet(x, 0.0, &dx, 0.0)
            }
        }
    }
}

fn arm_map(dz: usize, degree: usize) -> FeatureMap {
    if dz == 0 {
        return FeatureMap::polynomial(1, 0, crate::features::TBasis::Monomial { degree: 0 }, false)
            .expect("constant basis");
    }
    FeatureMap::polynomial(dz, degree, crate::features::TBasis::Monomial { degree: 0 }, false).expect("valid basis")
}

type OracleFn = Arc<dyn Fn(&[f64]) -> f64 + Send + Sync>;

#[derive(Clone)]
enum Kind {
    AteDirect { model: Arc<dyn ScoreModel>, pi: f64, quad: Quadrature },
    AteLogistic { model: Arc<dyn ScoreModel>, pi: f64, quad: Quadrature },
    AmeBridge { model: Arc<dyn ScoreModel> },
    AmeDsm { model: Arc<dyn ScoreModel>, sigma_min: f64 },
    Ape { model: Arc<dyn ScoreModel>, quad: Quadrature },
    Linear { basis: RieszBasis, w: Vec<f64> },
    Oracle(OracleFn),
}

/// A fitted representer `α̂(x)` with `x = (d, z)`.
pub struct RieszEstimate {
    pub provenance: Provenance,
    kind: Kind,
    clipped: AtomicU64,
    support: Option<Vec<(f64, f64)>>,
    trim: f64,
}

impl std::fmt::Debug for RieszEstimate {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("RieszEstimate").field("method", &self.provenance.method).finish()
    }
}

pub const PROPENSITY_CLIP: f64 = 1e-6;
const EXP_LIMIT: f64 = 700.0;

fn check_pi(pi: f64) -> Result<()> {
    if pi > 0.0 && pi < 1.0 {
        Ok(())
    } else {
        Err(Error::DegenerateArm(pi))
    }
}

fn exp_checked(v: f64) -> Result<f64> {
    if v > EXP_LIMIT || v.is_nan() {
        Err(Error::Overflow(v))
    } else {
        Ok(v.exp())
    }
}

impl RieszEstimate {
    fn build(mut provenance: Provenance, kind: Kind) -> Self {
        if provenance.checkpoint.is_none() {
            provenance.checkpoint = match &kind {
                Kind::AteDirect { model, .. }
                | Kind::AteLogistic { model, .. }
                | Kind::AmeBridge { model }
                | Kind::AmeDsm { model, .. }
                | Kind::Ape { model, .. } => Some(model.checkpoint()),
                _ => None,
            };
        }
        Self { provenance, kind, clipped: AtomicU64::new(0), support: None, trim: PROPENSITY_CLIP }
    }

    pub fn method(&self) -> RieszMethod {
        self.provenance.method
    }

    /// Clamp each coordinate of `x = (d, z)` into `bounds` before the score
    /// model is read.
    pub fn with_support(mut self, bounds: Vec<(f64, f64)>) -> Self {
        self.support = Some(bounds);
        self
    }

    /// Floor for estimated (or implied) propensities of binary
    /// representers; defaults to [`PROPENSITY_CLIP`].
    pub fn with_trim(mut self, trim: f64) -> Result<Self> {
        if !(trim > 0.0 && trim < 0.5) {
            return Err(Error::Validation(format!("propensity trim {trim} must lie in (0, 0.5)")));
        }
        self.trim = trim;
        Ok(self)
    }

    fn floor(&self, e: f64) -> f64 {
        if e < self.trim {
            self.clipped.fetch_add(1, Ordering::Relaxed);
            self.trim
        } else {
            e
        }
    }

    pub fn support(&self) -> Option<&[(f64, f64)]> {
        self.support.as_deref()
    }

    fn clamp_into(&self, x: &[f64], offset: usize) -> Vec<f64> {
        match &self.support {
            Some(b) => x.iter().zip(&b[offset..]).map(|(v, (lo, hi))| v.clamp(*lo, *hi)).collect(),
            None => x.to_vec(),
        }
    }

    /// Number of propensities clipped so far.
    pub fn clipped(&self) -> u64 {
        self.clipped.load(Ordering::Relaxed)
    }

    /// Representer from a known function, for oracle runs.
    pub fn oracle(f: impl Fn(&[f64]) -> f64 + Send + Sync + 'static) -> Self {
        Self::build(Provenance::new(RieszMethod::Oracle), Kind::Oracle(Arc::new(f)))
    }

    pub fn linear(basis: RieszBasis, w: Vec<f64>) -> Result<Self> {
        if w.len() != basis.len() {
            return Err(Error::Validation("weight count does not match the basis".into()));
        }
        Ok(Self::build(Provenance::new(RieszMethod::Baseline), Kind::Linear { basis, w }))
    }

    /// Estimated propensity `ê(z)` for the logistic construction.
    pub fn propensity(&self, z: &[f64]) -> Option<f64> {
        match &self.kind {
            Kind::AteLogistic { model, pi, quad } => {
                let z = self.clamp_into(z, 1);
                // the score jumps at t = 0, so each side gets its own rule
                let a = integrate_time_score(model.as_ref(), &z, -1.0, 0.0, quad)
                    + integrate_time_score(model.as_ref(), &z, 0.0, 1.0, quad)
                    + logit(*pi);
                let e = sigmoid(a);
                Some(1.0 - self.floor(1.0 - self.floor(e)))
            }
            _ => None,
        }
    }

    pub fn eval(&self, x: &[f64]) -> Result<f64> {
        let arm = |d: f64| -> Result<bool> {
            if d == 1.0 {
                Ok(true)
            } else if d == -1.0 {
                Ok(false)
            } else {
                Err(Error::Validation(format!("binary representer evaluated at d = {d}")))
            }
        };
        let clamped = self.clamp_into(x, 0);
        let x = &clamped[..];
        match &self.kind {
            Kind::AteDirect { model, pi, quad } => {
                let z = &x[1..];
                // implied arm propensities π p1/p0 and (1 - π) p-1/p0, with
                // p0/p±1 = exp(∫_±1^0 s dt)
                if arm(x[0])? {
                    let r = exp_checked(integrate_time_score(model.as_ref(), z, 1.0, 0.0, quad))?;
                    Ok(1.0 / self.floor(pi / r))
                } else {
                    let r = exp_checked(integrate_time_score(model.as_ref(), z, -1.0, 0.0, quad))?;
                    Ok(-1.0 / self.floor((1.0 - pi) / r))
                }
            }
            Kind::AteLogistic { .. } => {
                let e = self.propensity(&x[1..]).expect("logistic kind");
                Ok(if arm(x[0])? { 1.0 / e } else { -1.0 / (1.0 - e) })
            }
            Kind::AmeBridge { model } => Ok(model.eval(x, 0.0)),
            Kind::AmeDsm { model, sigma_min } => Ok(-model.eval(x, *sigma_min)),
            Kind::Ape { model, quad } => {
                let up = integrate_time_score(model.as_ref(), x, 0.0, 1.0, quad);
                let down = integrate_time_score(model.as_ref(), x, -1.0, 0.0, quad);
                Ok(exp_checked(up)? - exp_checked(-down)?)
            }
            Kind::Linear { basis, w } => Ok(basis.eval(x).0.iter().zip(w).map(|(a, b)| a * b).sum()),
            Kind::Oracle(f) => Ok(f(x)),
        }
    }

    /// Evaluate on row-major points of width `dim`, in parallel.
    pub fn eval_rows(&self, rows: &[f64], dim: usize) -> Result<Vec<f64>> {
        par::map_indexed(rows.len() / dim, |i| self.eval(&rows[i * dim..(i + 1) * dim])).into_iter().collect()
    }

    /// Write `x1..xK,alpha_hat` rows to a CSV file.
    pub fn export_csv(&self, rows: &[f64], dim: usize, path: impl AsRef<Path>) -> Result<()> {
        let alpha = self.eval_rows(rows, dim)?;
        let mut w = csv::Writer::from_path(path)?;
        let mut header: Vec<String> = (1..=dim).map(|k| format!("x{k}")).collect();
        header.push("alpha_hat".into());
        w.write_record(&header)?;
        for (i, a) in alpha.iter().enumerate() {
            let mut rec: Vec<String> = rows[i * dim..(i + 1) * dim].iter().map(f64::to_string).collect();
            rec.push(a.to_string());
            w.write_record(&rec)?;
        }
        w.flush()?;
        Ok(())
    }
}

fn with_quad(method: RieszMethod, quad: &Quadrature, pi: Option<f64>) -> Provenance {
    Provenance { quadrature_points: Some(quad.points), pi_hat: pi, ..Provenance::new(method) }
}

/// `α̂(1, z) = exp(∫_1^0 s) / π̂` and `α̂(-1, z) = -exp(∫_-1^0 s) / (1 - π̂)`
/// from a score on the two-sided treatment bridge over `z`.
pub fn riesz_ate_direct(model: Arc<dyn ScoreModel>, pi: f64, quad: Quadrature) -> Result<RieszEstimate> {
    check_pi(pi)?;
    Ok(RieszEstimate::build(with_quad(RieszMethod::AteDirect, &quad, Some(pi)), Kind::AteDirect { model, pi, quad }))
}

/// Propensity `ê(z) = sigmoid(∫_-1^1 s dt + logit π̂)`, clipped into
/// `[1e-6, 1 - 1e-6]`, and `α̂ = 1[d=1]/ê - 1[d=-1]/(1-ê)`.
pub fn riesz_ate_logistic(model: Arc<dyn ScoreModel>, pi: f64, quad: Quadrature) -> Result<RieszEstimate> {
    check_pi(pi)?;
    Ok(RieszEstimate::build(
        with_quad(RieszMethod::AteLogistic, &quad, Some(pi)),
        Kind::AteLogistic { model, pi, quad },
    ))
}

/// `α̂(d, z) = s((d, z), 0)` from a score on the marginal-effect bridge.
pub fn riesz_ame_bridge(model: Arc<dyn ScoreModel>) -> RieszEstimate {
    RieszEstimate::build(Provenance::new(RieszMethod::AmeBridge), Kind::AmeBridge { model })
}

/// `α̂(d, z) = -s(d, z, σ_min)` from a denoising score.
pub fn riesz_ame_dsm(model: Arc<dyn ScoreModel>, sigma_min: f64) -> Result<RieszEstimate> {
    if !(sigma_min > 0.0) {
        return Err(Error::Validation("sigma_min must be positive".into()));
    }
    Ok(RieszEstimate::build(
        Provenance { sigma_min: Some(sigma_min), ..Provenance::new(RieszMethod::AmeDsm) },
        Kind::AmeDsm { model, sigma_min },
    ))
}

/// `α̂(x) = exp(∫_0^1 s) - exp(-∫_-1^0 s)` from a score on the two-sided
/// policy bridge.
pub fn riesz_ape(model: Arc<dyn ScoreModel>, quad: Quadrature) -> RieszEstimate {
    RieszEstimate::build(with_quad(RieszMethod::ApeExp, &quad, None), Kind::Ape { model, quad })
}

/// `(∫_0^1 u_score(u) du, ∫_0^-1 u_score(u) du)`: with the conditional score
/// `∂_u log p(u | z)` these are the policy log-ratios
/// `log p(1 | z) - log p(0 | z)` and `log p(-1 | z) - log p(0 | z)`.
pub fn ame_ape_bridge_check(u_score: impl Fn(f64) -> f64, quad: &Quadrature) -> (f64, f64) {
    (quad.integrate(&u_score, 0.0, 1.0), quad.integrate(&u_score, 0.0, -1.0))
}

/// [`ame_ape_bridge_check`] with the score read off a marginal-effect bridge
/// model, using `∂_u log p(u, z) = -s((u, z), 0)`.
pub fn ame_ape_bridge_check_learned(model: &dyn ScoreModel, z: &[f64], quad: &Quadrature) -> (f64, f64) {
    let mut x = Vec::with_capacity(z.len() + 1);
    x.push(0.0);
    x.extend_from_slice(z);
    ame_ape_bridge_check(
        |u| {
            let mut x = x.clone();
            x[0] = u;
            -model.eval(&x, 0.0)
        },
        quad,
    )
}

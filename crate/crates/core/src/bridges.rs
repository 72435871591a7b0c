//! Bridge random variables `X_t` between endpoint laws, and exact Gaussian
//! bridge oracles.
//!
//! A path is stored as a base draw (the law at `t = 0` for two-sided bridges,
//! or the law at `t = 0` of the one-sided bridge) together with one outer draw
//! per half of the time domain. Coordinates past `bridged` pass through from
//! the base draw unchanged.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::Rng;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScheduleKind {
    /// `X_t = (1 - t) X_0 + t X_1` on `[0, 1]`.
    LinearOneSided,
    /// `X_t = |t| X_{±1} + (1 - |t|) X_0` on `[-1, 1]`.
    TwoSidedAbs,
    /// `X_t = t² X_{±1} + (1 - t²) X_0` on `[-1, 1]`.
    TwoSidedSmooth,
    /// `D_t = t + (1 - t²) D` on `[-1, 1]`.
    AmeShift,
}

/// Coefficients of the outer and base draws and their time derivatives.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Coeffs {
    pub outer: f64,
    pub base: f64,
    pub d_outer: f64,
    pub d_base: f64,
}

fn sign(t: f64) -> f64 {
    if t.is_sign_negative() {
        -1.0
    } else {
        1.0
    }
}

impl ScheduleKind {
    pub fn domain(self) -> (f64, f64) {
        match self {
            ScheduleKind::LinearOneSided => (0.0, 1.0),
            _ => (-1.0, 1.0),
        }
    }

    pub fn is_two_sided(self) -> bool {
        self != ScheduleKind::LinearOneSided
    }

    pub fn check(self, t: f64) -> Result<()> {
        let (lo, hi) = self.domain();
        if t >= lo && t <= hi {
            Ok(())
        } else {
            Err(Error::Domain { t, lo, hi })
        }
    }

    /// Coefficients at `t`. On two-sided kinds the outer draw is the `+1`
    /// endpoint for `t >= +0` and the `-1` endpoint for `t <= -0`; the AME
    /// outer draws are the point masses `±1`.
    pub fn coeffs(self, t: f64) -> Coeffs {
        match self {
            ScheduleKind::LinearOneSided => Coeffs { outer: t, base: 1.0 - t, d_outer: 1.0, d_base: -1.0 },
            ScheduleKind::TwoSidedAbs => {
                let s = sign(t);
                Coeffs { outer: t.abs(), base: 1.0 - t.abs(), d_outer: s, d_base: -s }
            }
            ScheduleKind::TwoSidedSmooth => Coeffs { outer: t * t, base: 1.0 - t * t, d_outer: 2.0 * t, d_base: -2.0 * t },
            ScheduleKind::AmeShift => {
                Coeffs { outer: t.abs(), base: 1.0 - t * t, d_outer: sign(t), d_base: -2.0 * t }
            }
        }
    }

    /// `(β1, β2, dβ1, dβ2)` in the conventional parameterisation: `β1` weighs
    /// `X_0` on the one-sided bridge, the outer draw on two-sided bridges, and
    /// is the additive shift on the AME bridge.
    pub fn betas(self, t: f64) -> (f64, f64, f64, f64) {
        match self {
            ScheduleKind::LinearOneSided => (1.0 - t, t, -1.0, 1.0),
            ScheduleKind::AmeShift => (t, 1.0 - t * t, 1.0, -2.0 * t),
            _ => {
                let c = self.coeffs(t);
                (c.outer, c.base, c.d_outer, c.d_base)
            }
        }
    }
}

/// An endpoint law that can be sampled.
#[derive(Debug, Clone)]
pub enum Source {
    /// Resample rows (row-major, `dim` columns) uniformly, then add `shift`.
    Empirical { rows: Arc<Vec<f64>>, dim: usize, shift: Vec<f64> },
    /// Isotropic Gaussian.
    Gaussian { mean: Vec<f64>, sd: f64 },
    PointMass(Vec<f64>),
}

impl Source {
    pub fn empirical(rows: Vec<f64>, dim: usize) -> Result<Self> {
        if dim == 0 || rows.is_empty() || rows.len() % dim != 0 {
            return Err(Error::Validation(format!(
                "empirical source needs a non-empty multiple of {dim} values, got {}",
                rows.len()
            )));
        }
        Ok(Source::Empirical { rows: Arc::new(rows), dim, shift: vec![0.0; dim] })
    }

    /// Same rows, translated by `shift`.
    pub fn shifted(&self, shift: &[f64]) -> Self {
        match self {
            Source::Empirical { rows, dim, shift: s0 } => Source::Empirical {
                rows: Arc::clone(rows),
                dim: *dim,
                shift: s0.iter().zip(shift).map(|(a, b)| a + b).collect(),
            },
            Source::Gaussian { mean, sd } => {
                Source::Gaussian { mean: mean.iter().zip(shift).map(|(a, b)| a + b).collect(), sd: *sd }
            }
            Source::PointMass(p) => Source::PointMass(p.iter().zip(shift).map(|(a, b)| a + b).collect()),
        }
    }

    pub fn dim(&self) -> usize {
        match self {
            Source::Empirical { dim, .. } => *dim,
            Source::Gaussian { mean, .. } => mean.len(),
            Source::PointMass(p) => p.len(),
        }
    }

    pub fn draw_into(&self, rng: &mut Rng, out: &mut [f64]) {
        match self {
            Source::Empirical { rows, dim, shift } => {
                let i = rng.index(rows.len() / dim);
                for k in 0..*dim {
                    out[k] = rows[i * dim + k] + shift[k];
                }
            }
            Source::Gaussian { mean, sd } => {
                for (o, m) in out.iter_mut().zip(mean) {
                    *o = m + sd * rng.normal();
                }
            }
            Source::PointMass(p) => out.copy_from_slice(p),
        }
    }

    pub fn draw(&self, rng: &mut Rng) -> Vec<f64> {
        let mut out = vec![0.0; self.dim()];
        self.draw_into(rng, &mut out);
        out
    }
}

/// Endpoint laws and schedule of a bridge.
#[derive(Debug, Clone)]
pub struct BridgeSampler {
    pub schedule: ScheduleKind,
    /// Law at `t = 0`.
    pub base: Source,
    /// Law at `t = 1`.
    pub pos: Source,
    /// Law at `t = -1`; ignored on one-sided bridges.
    pub neg: Option<Source>,
    /// Leading coordinates that are bridged; the rest pass through.
    pub bridged: usize,
    /// Draw the two outer endpoints from one shared random state.
    pub coupled: bool,
}

impl BridgeSampler {
    pub fn one_sided(base: Source, end: Source) -> Result<Self> {
        let s = Self {
            schedule: ScheduleKind::LinearOneSided,
            bridged: base.dim(),
            base,
            pos: end,
            neg: None,
            coupled: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn two_sided(schedule: ScheduleKind, base: Source, pos: Source, neg: Source) -> Result<Self> {
        let s = Self { schedule, bridged: base.dim(), base, pos, neg: Some(neg), coupled: false };
        s.validate()?;
        Ok(s)
    }

    /// The marginal-effect bridge over joint `(d, z)` rows.
    pub fn ame(joint: Source) -> Result<Self> {
        let s = Self {
            schedule: ScheduleKind::AmeShift,
            base: joint,
            pos: Source::PointMass(vec![1.0]),
            neg: Some(Source::PointMass(vec![-1.0])),
            bridged: 1,
            coupled: false,
        };
        s.validate()?;
        Ok(s)
    }

    pub fn with_coupling(mut self, coupled: bool) -> Self {
        self.coupled = coupled;
        self
    }

    fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::Validation(m.to_string()));
        if self.bridged == 0 || self.bridged > self.base.dim() {
            return bad("bridged coordinates out of range");
        }
        if self.pos.dim() != self.bridged {
            return bad("outer source dimension mismatch");
        }
        if self.schedule.is_two_sided() {
            match &self.neg {
                Some(n) if n.dim() == self.bridged => {}
                _ => return bad("two-sided bridge needs a negative endpoint of matching dimension"),
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.base.dim()
    }

    /// Draw the endpoints of one path.
    pub fn draw_path(&self, rng: &mut Rng) -> BridgePath {
        let base = self.base.draw(rng);
        let (pos, neg) = match (&self.neg, self.coupled) {
            (Some(n), true) => {
                let mut twin = rng.clone();
                let p = self.pos.draw(rng);
                (p, n.draw(&mut twin))
            }
            (Some(n), false) => {
                let p = self.pos.draw(rng);
                (p, n.draw(rng))
            }
            (None, _) => (self.pos.draw(rng), Vec::new()),
        };
        BridgePath { schedule: self.schedule, base, pos, neg, bridged: self.bridged }
    }
}

/// Endpoint draws of one bridge path.
#[derive(Debug, Clone, PartialEq)]
pub struct BridgePath {
    pub schedule: ScheduleKind,
    pub base: Vec<f64>,
    pub pos: Vec<f64>,
    /// Empty on one-sided bridges.
    pub neg: Vec<f64>,
    pub bridged: usize,
}

impl BridgePath {
    fn outer(&self, t: f64) -> &[f64] {
        if t.is_sign_negative() && !self.neg.is_empty() {
            &self.neg
        } else {
            &self.pos
        }
    }

    /// `X_t` written into `out`.
    pub fn position_into(&self, t: f64, out: &mut [f64]) {
        let c = self.schedule.coeffs(t);
        let outer = self.outer(t);
        for k in 0..self.base.len() {
            out[k] = if k < self.bridged { c.outer * outer[k] + c.base * self.base[k] } else { self.base[k] };
        }
    }

    /// `dX_t/dt` written into `out`.
    pub fn velocity_into(&self, t: f64, out: &mut [f64]) {
        let c = self.schedule.coeffs(t);
        let outer = self.outer(t);
        for k in 0..self.base.len() {
            out[k] = if k < self.bridged { c.d_outer * outer[k] + c.d_base * self.base[k] } else { 0.0 };
        }
    }

    pub fn position(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        self.position_into(t, &mut out);
        out
    }

    pub fn velocity(&self, t: f64) -> Vec<f64> {
        let mut out = vec![0.0; self.base.len()];
        self.velocity_into(t, &mut out);
        out
    }
}

/// Draw one `X_t` from the sampler.
pub fn sample_bridge(sampler: &BridgeSampler, t: f64, rng: &mut Rng) -> Result<Vec<f64>> {
    sampler.schedule.check(t)?;
    Ok(sampler.draw_path(rng).position(t))
}

/// `X_t = (β1(t) + β2(t) d, z)` on the default marginal-effect schedule.
pub fn sample_ame_bridge(d: f64, z: &[f64], t: f64) -> Result<Vec<f64>> {
    ScheduleKind::AmeShift.check(t)?;
    let (b1, b2, _, _) = ScheduleKind::AmeShift.betas(t);
    let mut x = Vec::with_capacity(z.len() + 1);
    x.push(b1 + b2 * d);
    x.extend_from_slice(z);
    Ok(x)
}

/// Anything that knows the exact time score of a bridge.
pub trait TimeScoreOracle: Send + Sync {
    fn time_score(&self, x: &[f64], t: f64) -> Result<f64>;
}

/// Isotropic Gaussian component of an endpoint law.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Component {
    pub weight: f64,
    pub mean: Vec<f64>,
    pub sd: f64,
}

/// Exact law of `X_t` when the base law is a mixture of isotropic Gaussians
/// and the outer laws are isotropic Gaussians.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianBridgeOracle {
    pub schedule: ScheduleKind,
    pub base: Vec<Component>,
    pub pos: Component,
    pub neg: Option<Component>,
}

impl GaussianBridgeOracle {
    /// Single Gaussian at each end.
    pub fn new(mu0: Vec<f64>, sigma0: f64, mu1: Vec<f64>, sigma1: f64, schedule: ScheduleKind) -> Self {
        let neg = schedule.is_two_sided().then(|| Component {
            weight: 1.0,
            mean: mu1.iter().map(|m| -m).collect(),
            sd: sigma1,
        });
        Self {
            schedule,
            base: vec![Component { weight: 1.0, mean: mu0, sd: sigma0 }],
            pos: Component { weight: 1.0, mean: mu1, sd: sigma1 },
            neg,
        }
    }

    pub fn dim(&self) -> usize {
        self.pos.mean.len()
    }

    /// Sampler with the same endpoint laws (the base must be one component).
    pub fn sampler(&self) -> Result<BridgeSampler> {
        if self.base.len() != 1 {
            return Err(Error::UnsupportedOracle("sampler needs a single base component".into()));
        }
        let g = |c: &Component| Source::Gaussian { mean: c.mean.clone(), sd: c.sd };
        match (&self.neg, self.schedule.is_two_sided()) {
            (Some(n), true) => BridgeSampler::two_sided(self.schedule, g(&self.base[0]), g(&self.pos), g(n)),
            (_, false) => BridgeSampler::one_sided(g(&self.base[0]), g(&self.pos)),
            _ => Err(Error::UnsupportedOracle("two-sided schedule without negative endpoint".into())),
        }
    }

    fn outer(&self, t: f64) -> &Component {
        match &self.neg {
            Some(n) if t.is_sign_negative() => n,
            _ => &self.pos,
        }
    }

    /// Per base component: `(log weight, mean, dmean, variance, dvariance)`
    /// evaluated coordinatewise and combined into log-density and time score.
    fn log_density_and_score(&self, x: &[f64], t: f64) -> Result<(f64, f64)> {
        self.schedule.check(t)?;
        let c = self.schedule.coeffs(t);
        let outer = self.outer(t);
        let mut logs = Vec::with_capacity(self.base.len());
        let mut scores = Vec::with_capacity(self.base.len());
        for comp in &self.base {
            let v = c.outer * c.outer * outer.sd * outer.sd + c.base * c.base * comp.sd * comp.sd;
            let dv = 2.0 * c.outer * c.d_outer * outer.sd * outer.sd + 2.0 * c.base * c.d_base * comp.sd * comp.sd;
            if !(v > 0.0) {
                return Err(Error::DegenerateLaw { t, variance: v });
            }
            let mut logp = comp.weight.ln();
            let mut score = 0.0;
            for k in 0..x.len() {
                let m = c.outer * outer.mean[k] + c.base * comp.mean[k];
                let dm = c.d_outer * outer.mean[k] + c.d_base * comp.mean[k];
                let r = x[k] - m;
                logp += -0.5 * r * r / v - 0.5 * (2.0 * std::f64::consts::PI * v).ln();
                score += r * dm / v + r * r * dv / (2.0 * v * v) - dv / (2.0 * v);
            }
            logs.push(logp);
            scores.push(score);
        }
        let top = logs.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let total: f64 = logs.iter().map(|l| (l - top).exp()).sum();
        let score = logs.iter().zip(&scores).map(|(l, s)| (l - top).exp() * s).sum::<f64>() / total;
        Ok((top + total.ln(), score))
    }

    /// `log p_t(x)`.
    pub fn log_density(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_density_and_score(x, t)?.0)
    }

    /// `(mean, variance)` of coordinate `k` of `X_t` for a single-component base.
    pub fn moments(&self, k: usize, t: f64) -> (f64, f64) {
        let c = self.schedule.coeffs(t);
        let o = self.outer(t);
        let b = &self.base[0];
        (
            c.outer * o.mean[k] + c.base * b.mean[k],
            c.outer * c.outer * o.sd * o.sd + c.base * c.base * b.sd * b.sd,
        )
    }
}

impl TimeScoreOracle for GaussianBridgeOracle {
    fn time_score(&self, x: &[f64], t: f64) -> Result<f64> {
        Ok(self.log_density_and_score(x, t)?.1)
    }
}

/// Sum of `log p_{(i-1)/T}(x) - log p_{i/T}(x)` over `i = 1..T`.
pub fn telescoped_log_ratio(oracle: &GaussianBridgeOracle, x: &[f64], steps: usize) -> Result<f64> {
    if steps == 0 {
        return Err(Error::Validation("telescoping needs at least one step".into()));
    }
    let mut total = 0.0;
    let mut prev = oracle.log_density(x, 0.0)?;
    for i in 1..=steps {
        let t = if i == steps { 1.0 } else { i as f64 / steps as f64 };
        let cur = oracle.log_density(x, t)?;
        total += prev - cur;
        prev = cur;
    }
    Ok(total)
}

//! Gaussian data-generating processes with closed-form oracles.

use serde::{Deserialize, Serialize};

use crate::bridges::{Component, GaussianBridgeOracle, ScheduleKind, TimeScoreOracle};
use crate::data::{Dataset, TreatmentKind};
use crate::error::{Error, Result};
use crate::rng::Rng;
use crate::stats::{logit, sigmoid};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DgpSpec {
    /// `D = ±1` with `P(D = 1) = pi`, `Z | D ~ N(D mu 1, I)`,
    /// `Y = beta0 + beta_d D + beta_z Σz + beta_dz D Σz + noise`.
    AteGaussMix { dz: usize, mu: f64, pi: f64, beta0: f64, beta_d: f64, beta_z: f64, beta_dz: f64, noise: f64 },
    /// `Z ~ N(0, I)`, `D | Z ~ N(c z̄, s²)` (optionally truncated to
    /// `[-1, 1]`), `Y = a1 D + a2 D² + b Σz + noise`.
    AmeGaussCond { dz: usize, c: f64, s: f64, a1: f64, a2: f64, b: f64, noise: f64, truncated: bool },
    /// `X = (D, Z) ~ N(0, I)`; the policies are `N(±mu 1, I)`.
    /// `Y = c1 D + c2 D² + b Σz + noise`.
    ApeGaussShift { dz: usize, mu: f64, c1: f64, c2: f64, b: f64, noise: f64 },
}

impl DgpSpec {
    pub fn ate_default() -> Self {
        DgpSpec::AteGaussMix { dz: 1, mu: 1.0, pi: 0.5, beta0: 0.0, beta_d: 1.0, beta_z: 1.0, beta_dz: 0.0, noise: 1.0 }
    }

    pub fn ame_default() -> Self {
        DgpSpec::AmeGaussCond { dz: 1, c: 0.5, s: 0.5, a1: 1.0, a2: 0.5, b: 1.0, noise: 1.0, truncated: false }
    }

    pub fn ape_default() -> Self {
        DgpSpec::ApeGaussShift { dz: 0, mu: 1.0, c1: 1.0, c2: 0.5, b: 1.0, noise: 1.0 }
    }

    pub fn dz(&self) -> usize {
        match self {
            DgpSpec::AteGaussMix { dz, .. } | DgpSpec::AmeGaussCond { dz, .. } | DgpSpec::ApeGaussShift { dz, .. } => *dz,
        }
    }

    pub fn treatment_kind(&self) -> TreatmentKind {
        match self {
            DgpSpec::AteGaussMix { .. } => TreatmentKind::Binary,
            _ => TreatmentKind::Continuous,
        }
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Validation(m));
        if self.dz() > 20 {
            return bad(format!("dz = {} exceeds 20", self.dz()));
        }
        match *self {
            DgpSpec::AteGaussMix { dz, mu, pi, noise, .. } => {
                if !(pi > 0.0 && pi < 1.0) {
                    return bad(format!("pi = {pi} must lie in (0, 1)"));
                }
                if dz == 0 || !mu.is_finite() || !(noise >= 0.0) {
                    return bad("need dz >= 1, finite mu and noise >= 0".into());
                }
            }
            DgpSpec::AmeGaussCond { dz, s, noise, .. } => {
                if dz == 0 || !(s > 0.0) || !(noise >= 0.0) {
                    return bad("need dz >= 1, s > 0 and noise >= 0".into());
                }
            }
            DgpSpec::ApeGaussShift { mu, noise, .. } => {
                if !mu.is_finite() || !(noise >= 0.0) {
                    return bad("need finite mu and noise >= 0".into());
                }
            }
        }
        Ok(())
    }
}

/// Closed-form truths of a [`DgpSpec`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OracleBundle {
    pub spec: DgpSpec,
    pub theta0: f64,
}

fn zsum(z: &[f64]) -> f64 {
    z.iter().sum()
}

fn zbar(z: &[f64]) -> f64 {
    if z.is_empty() {
        0.0
    } else {
        zsum(z) / z.len() as f64
    }
}

/// `θ₀` by Gaussian moment formulas.
pub fn oracle_theta(spec: &DgpSpec) -> Result<f64> {
    spec.validate()?;
    Ok(match *spec {
        DgpSpec::AteGaussMix { dz, mu, pi, beta_d, beta_dz, .. } => {
            2.0 * beta_d + 2.0 * beta_dz * dz as f64 * mu * (2.0 * pi - 1.0)
        }
        // E[D] = 0 because z̄ is centred and the truncation is symmetric
        DgpSpec::AmeGaussCond { a1, .. } => a1,
        DgpSpec::ApeGaussShift { dz, mu, c1, b, .. } => 2.0 * mu * (c1 + b * dz as f64),
    })
}

fn truncated_normal(mean: f64, sd: f64, rng: &mut Rng) -> Result<f64> {
    for _ in 0..100_000 {
        let v = mean + sd * rng.normal();
        if (-1.0..=1.0).contains(&v) {
            return Ok(v);
        }
    }
    Err(Error::Validation(format!("truncation window has negligible mass at mean {mean}")))
}

/// Draw `n` rows and the matching oracle.
pub fn generate(spec: &DgpSpec, n: usize, rng: &mut Rng) -> Result<(Dataset, OracleBundle)> {
    spec.validate()?;
    if n == 0 {
        return Err(Error::Validation("n must be at least 1".into()));
    }
    let bundle = OracleBundle { spec: spec.clone(), theta0: oracle_theta(spec)? };
    let dz = spec.dz();
    let (mut y, mut d, mut z) = (Vec::with_capacity(n), Vec::with_capacity(n), Vec::with_capacity(n * dz));
    let mut zi = vec![0.0; dz];
    for _ in 0..n {
        let (di, noise) = match *spec {
            DgpSpec::AteGaussMix { mu, pi, noise, .. } => {
                let di = if rng.uniform() < pi { 1.0 } else { -1.0 };
                for v in zi.iter_mut() {
                    *v = di * mu + rng.normal();
                }
                (di, noise)
            }
            DgpSpec::AmeGaussCond { c, s, noise, truncated, .. } => {
                for v in zi.iter_mut() {
                    *v = rng.normal();
                }
                let m = c * zbar(&zi);
                let di = if truncated { truncated_normal(m, s, rng)? } else { m + s * rng.normal() };
                (di, noise)
            }
            DgpSpec::ApeGaussShift { noise, .. } => {
                let di = rng.normal();
                for v in zi.iter_mut() {
                    *v = rng.normal();
                }
                (di, noise)
            }
        };
        y.push(bundle.gamma0(di, &zi) + noise * rng.normal());
        d.push(di);
        z.extend_from_slice(&zi);
    }
    Ok((Dataset::new(y, d, z, dz, spec.treatment_kind())?, bundle))
}

impl OracleBundle {
    pub fn gamma0(&self, d: f64, z: &[f64]) -> f64 {
        match self.spec {
            DgpSpec::AteGaussMix { beta0, beta_d, beta_z, beta_dz, .. } => {
                beta0 + beta_d * d + beta_z * zsum(z) + beta_dz * d * zsum(z)
            }
            DgpSpec::AmeGaussCond { a1, a2, b, .. } => a1 * d + a2 * d * d + b * zsum(z),
            DgpSpec::ApeGaussShift { c1, c2, b, .. } => c1 * d + c2 * d * d + b * zsum(z),
        }
    }

    /// `∂_d γ₀(d, z)`.
    pub fn dgamma0(&self, d: f64, z: &[f64]) -> f64 {
        match self.spec {
            DgpSpec::AteGaussMix { beta_d, beta_dz, .. } => beta_d + beta_dz * zsum(z),
            DgpSpec::AmeGaussCond { a1, a2, .. } => a1 + 2.0 * a2 * d,
            DgpSpec::ApeGaussShift { c1, c2, .. } => c1 + 2.0 * c2 * d,
        }
    }

    /// Propensity `P(D = 1 | z)` of the treatment mixture.
    pub fn e0(&self, z: &[f64]) -> Result<f64> {
        match self.spec {
            DgpSpec::AteGaussMix { mu, pi, .. } => Ok(sigmoid(2.0 * mu * zsum(z) + logit(pi))),
            _ => Err(Error::UnsupportedOracle("propensity is defined for the binary design only".into())),
        }
    }

    /// Log densities `(log p₁(z), log p₋₁(z), log p₀(z))` of the arms and the
    /// covariate marginal.
    pub fn ate_log_densities(&self, z: &[f64]) -> Result<(f64, f64, f64)> {
        match self.spec {
            DgpSpec::AteGaussMix { mu, pi, .. } => {
                let lg = |m: f64| {
                    z.iter().map(|v| -0.5 * (v - m) * (v - m) - 0.5 * (2.0 * std::f64::consts::PI).ln()).sum::<f64>()
                };
                let (l1, lm) = (lg(mu), lg(-mu));
                let a = pi.ln() + l1;
                let b = (1.0 - pi).ln() + lm;
                let top = a.max(b);
                Ok((l1, lm, top + ((a - top).exp() + (b - top).exp()).ln()))
            }
            _ => Err(Error::UnsupportedOracle("arm densities need the binary design".into())),
        }
    }

    /// The true representer at `x = (d, z)`.
    pub fn alpha0(&self, x: &[f64]) -> f64 {
        let (d, z) = (x[0], &x[1..]);
        match self.spec {
            DgpSpec::AteGaussMix { .. } => {
                let e = self.e0(z).expect("binary design");
                if d == 1.0 {
                    1.0 / e
                } else {
                    -1.0 / (1.0 - e)
                }
            }
            DgpSpec::AmeGaussCond { c, s, .. } => (d - c * zbar(z)) / (s * s),
            DgpSpec::ApeGaussShift { mu, .. } => {
                let (sx, k) = (d + zsum(z), x.len() as f64);
                (mu * sx - 0.5 * k * mu * mu).exp() - (-mu * sx - 0.5 * k * mu * mu).exp()
            }
        }
    }

    /// `∂_u log p₀(u, z)` of the joint law of `(D, Z)`.
    pub fn du_log_p0(&self, u: f64, z: &[f64]) -> Result<f64> {
        match self.spec {
            DgpSpec::AmeGaussCond { c, s, .. } => Ok(-(u - c * zbar(z)) / (s * s)),
            DgpSpec::ApeGaussShift { .. } => Ok(-u),
            _ => Err(Error::UnsupportedOracle("continuous treatment needed".into())),
        }
    }

    /// `log p₀(u, z)` of the joint law of `(D, Z)`, untruncated.
    pub fn log_p0(&self, u: f64, z: &[f64]) -> Result<f64> {
        let ln2pi = (2.0 * std::f64::consts::PI).ln();
        let lz: f64 = z.iter().map(|v| -0.5 * v * v - 0.5 * ln2pi).sum();
        match self.spec {
            DgpSpec::AmeGaussCond { c, s, .. } => {
                let r = (u - c * zbar(z)) / s;
                Ok(lz - 0.5 * r * r - s.ln() - 0.5 * ln2pi)
            }
            DgpSpec::ApeGaussShift { .. } => Ok(lz - 0.5 * u * u - 0.5 * ln2pi),
            _ => Err(Error::UnsupportedOracle("continuous treatment needed".into())),
        }
    }

    /// Score of the noise-smoothed conditional law at level `sigma`.
    pub fn smoothed_score(&self, d: f64, z: &[f64], sigma: f64) -> Result<f64> {
        match self.spec {
            DgpSpec::AmeGaussCond { c, s, .. } => Ok(-(d - c * zbar(z)) / (s * s + sigma * sigma)),
            _ => Err(Error::UnsupportedOracle("smoothed score needs the marginal-effect design".into())),
        }
    }

    /// Exact law of the two-sided treatment bridge over `z`.
    pub fn ate_bridge_oracle(&self) -> Result<GaussianBridgeOracle> {
        match self.spec {
            DgpSpec::AteGaussMix { dz, mu, pi, .. } => {
                let comp = |w: f64, m: f64| Component { weight: w, mean: vec![m; dz], sd: 1.0 };
                Ok(GaussianBridgeOracle {
                    schedule: ScheduleKind::TwoSidedAbs,
                    base: vec![comp(pi, mu), comp(1.0 - pi, -mu)],
                    pos: comp(1.0, mu),
                    neg: Some(comp(1.0, -mu)),
                })
            }
            _ => Err(Error::UnsupportedOracle("treatment bridge needs the binary design".into())),
        }
    }

    /// Exact law of the two-sided policy bridge over `x = (d, z)`.
    pub fn ape_bridge_oracle(&self) -> Result<GaussianBridgeOracle> {
        match self.spec {
            DgpSpec::ApeGaussShift { dz, mu, .. } => {
                let shifted = |m: f64| Component { weight: 1.0, mean: vec![m; dz + 1], sd: 1.0 };
                Ok(GaussianBridgeOracle {
                    schedule: ScheduleKind::TwoSidedAbs,
                    base: vec![shifted(0.0)],
                    pos: shifted(mu),
                    neg: Some(shifted(-mu)),
                })
            }
            _ => Err(Error::UnsupportedOracle("policy bridge needs the policy-shift design".into())),
        }
    }

    /// Exact time score of the marginal-effect bridge.
    pub fn ame_bridge_oracle(&self) -> Result<AmeBridgeOracle> {
        match self.spec {
            DgpSpec::AmeGaussCond { c, s, truncated: false, .. } => Ok(AmeBridgeOracle { c, s }),
            _ => Err(Error::UnsupportedOracle("needs the untruncated marginal-effect design".into())),
        }
    }
}

/// Time score of `D_t = β1(t) + β2(t) D` when `D | Z ~ N(c z̄, s²)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AmeBridgeOracle {
    pub c: f64,
    pub s: f64,
}

impl TimeScoreOracle for AmeBridgeOracle {
    /// `-β2'/β2 - (β1' + u β2')/β2 · ∂_u log p₀(u, z)` with
    /// `u = (d_t - β1)/β2`.
    fn time_score(&self, x: &[f64], t: f64) -> Result<f64> {
        ScheduleKind::AmeShift.check(t)?;
        let (b1, b2, db1, db2) = ScheduleKind::AmeShift.betas(t);
        if !(b2 > 0.0) {
            return Err(Error::DegenerateLaw { t, variance: b2 * b2 * self.s * self.s });
        }
        let u = (x[0] - b1) / b2;
        let score_u = -(u - self.c * zbar(&x[1..])) / (self.s * self.s);
        Ok(-db2 / b2 - (db1 + u * db2) / b2 * score_u)
    }
}

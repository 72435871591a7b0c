//! Monte Carlo risks: time score matching over bridges, its Bregman
//! generalisation, the oracle squared-error risk, and denoising score
//! matching.

mod dsm;
mod tsm;

use serde::{Deserialize, Serialize};

pub use dsm::{dsm_quad_form, dsm_risk, reflect_boundary, DsmSettings};
pub use tsm::{
    bregman_newton_system, bregman_risk, bregman_risk_on, draw_time_batch, tsm_quad_form, tsm_quad_form_on, tsm_risk, tsm_risk_on,
    tsm_risk_oracle, tsm_risk_oracle_on, two_sided_tsm_risk, QuadForm, TimeBatch, TimeRecord, TsmSettings,
};

use crate::config::LambdaKind;
use crate::error::{Error, Result};
use crate::rng::Rng;

/// Loss value, parameter gradient and per-record contributions.
#[derive(Debug, Clone, PartialEq)]
pub struct Risk {
    pub loss: f64,
    pub grad: Vec<f64>,
    pub records: Vec<f64>,
}

impl Risk {
    /// Monte Carlo standard error of `loss`.
    pub fn se(&self) -> f64 {
        crate::stats::mean_se(&self.records).1
    }
}

/// Time weighting `λ(t)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum WeightFn {
    Constant,
    /// `t(1 - t)` on `[0, 1]`, or `1 - t²` on `[-1, 1]` when `two_sided`.
    EndpointVanishing { two_sided: bool },
}

impl WeightFn {
    pub fn from_kind(kind: LambdaKind, two_sided: bool) -> Self {
        match kind {
            LambdaKind::Constant => WeightFn::Constant,
            LambdaKind::EndpointVanishing => WeightFn::EndpointVanishing { two_sided },
        }
    }

    pub fn value(&self, t: f64) -> f64 {
        match self {
            WeightFn::Constant => 1.0,
            WeightFn::EndpointVanishing { two_sided: false } => t * (1.0 - t),
            WeightFn::EndpointVanishing { two_sided: true } => 1.0 - t * t,
        }
    }

    pub fn deriv(&self, t: f64) -> f64 {
        match self {
            WeightFn::Constant => 0.0,
            WeightFn::EndpointVanishing { two_sided: false } => 1.0 - 2.0 * t,
            WeightFn::EndpointVanishing { two_sided: true } => -2.0 * t,
        }
    }
}

/// Sampling law of the interior time. On two-sided bridges it is the law of
/// `|t|`, each draw being used at `+|t|` and `-|t|`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum TimeDistribution {
    Uniform { lo: f64, hi: f64 },
    Triangular { lo: f64, hi: f64, mode: f64 },
}

impl TimeDistribution {
    /// Uniform on `[ε, 1 - ε]`.
    pub fn one_sided(eps: f64) -> Self {
        TimeDistribution::Uniform { lo: eps, hi: 1.0 - eps }
    }

    /// `|t|` uniform on `[0, 1 - ε]`, i.e. `t` uniform on `[-1 + ε, 1 - ε]`.
    pub fn two_sided(eps: f64) -> Self {
        TimeDistribution::Uniform { lo: 0.0, hi: 1.0 - eps }
    }

    pub fn bounds(&self) -> (f64, f64) {
        match *self {
            TimeDistribution::Uniform { lo, hi } | TimeDistribution::Triangular { lo, hi, .. } => (lo, hi),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let (lo, hi) = self.bounds();
        let ok = match *self {
            TimeDistribution::Uniform { .. } => hi > lo,
            TimeDistribution::Triangular { mode, .. } => hi > lo && (lo..=hi).contains(&mode),
        };
        if ok && lo.is_finite() && hi.is_finite() {
            Ok(())
        } else {
            Err(Error::Validation(format!("bad time distribution {self:?}")))
        }
    }

    pub fn density(&self, t: f64) -> f64 {
        match *self {
            TimeDistribution::Uniform { lo, hi } => {
                if (lo..=hi).contains(&t) {
                    1.0 / (hi - lo)
                } else {
                    0.0
                }
            }
            TimeDistribution::Triangular { lo, hi, mode } => {
                if t < lo || t > hi {
                    0.0
                } else if t < mode {
                    2.0 * (t - lo) / ((hi - lo) * (mode - lo))
                } else if t > mode {
                    2.0 * (hi - t) / ((hi - lo) * (hi - mode))
                } else {
                    2.0 / (hi - lo)
                }
            }
        }
    }

    /// `1 / q(t)`, failing where the density vanishes.
    pub fn importance_weight(&self, t: f64) -> Result<f64> {
        let q = self.density(t);
        if q > 0.0 && q.is_finite() {
            Ok(1.0 / q)
        } else {
            Err(Error::ImportanceWeight { t, density: q })
        }
    }

    pub fn sample(&self, rng: &mut Rng) -> f64 {
        match *self {
            TimeDistribution::Uniform { lo, hi } => rng.uniform_in(lo, hi),
            TimeDistribution::Triangular { lo, hi, mode } => {
                let u = rng.uniform();
                let f = (mode - lo) / (hi - lo);
                if u < f {
                    lo + (u * (hi - lo) * (mode - lo)).sqrt()
                } else {
                    hi - ((1.0 - u) * (hi - lo) * (hi - mode)).sqrt()
                }
            }
        }
    }

    pub fn cdf(&self, t: f64) -> f64 {
        let (lo, hi) = self.bounds();
        if t <= lo {
            return 0.0;
        }
        if t >= hi {
            return 1.0;
        }
        match *self {
            TimeDistribution::Uniform { .. } => (t - lo) / (hi - lo),
            TimeDistribution::Triangular { mode, .. } => {
                if t <= mode {
                    (t - lo) * (t - lo) / ((hi - lo) * (mode - lo))
                } else {
                    1.0 - (hi - t) * (hi - t) / ((hi - lo) * (hi - mode))
                }
            }
        }
    }
}

/// Strictly convex `g` for the Bregman risk.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BregmanG {
    /// `a² / 2`
    Quadratic,
    /// `a² / 2 + a⁴ / 4`
    QuarticStrict,
}

impl BregmanG {
    pub fn g(self, a: f64) -> f64 {
        match self {
            BregmanG::Quadratic => 0.5 * a * a,
            BregmanG::QuarticStrict => 0.5 * a * a + 0.25 * a.powi(4),
        }
    }

    pub fn d1(self, a: f64) -> f64 {
        match self {
            BregmanG::Quadratic => a,
            BregmanG::QuarticStrict => a + a.powi(3),
        }
    }

    pub fn d2(self, a: f64) -> f64 {
        match self {
            BregmanG::Quadratic => 1.0,
            BregmanG::QuarticStrict => 1.0 + 3.0 * a * a,
        }
    }

    pub fn d3(self, a: f64) -> f64 {
        match self {
            BregmanG::Quadratic => 0.0,
            BregmanG::QuarticStrict => 6.0 * a,
        }
    }

    pub fn d4(self, _a: f64) -> f64 {
        match self {
            BregmanG::Quadratic => 0.0,
            BregmanG::QuarticStrict => 6.0,
        }
    }

    /// `BD_g(a | b)`.
    pub fn divergence(self, a: f64, b: f64) -> f64 {
        self.g(a) - self.g(b) - self.d1(b) * (a - b)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::{prop_assert, proptest};

    #[test]
    fn weights() {
        let w = WeightFn::EndpointVanishing { two_sided: true };
        assert_eq!(w.value(1.0), 0.0);
        assert_eq!(w.value(-1.0), 0.0);
        let w1 = WeightFn::EndpointVanishing { two_sided: false };
        assert_eq!(w1.value(0.0), 0.0);
        assert_eq!(w1.value(1.0), 0.0);
        let h = 1e-6;
        for w in [w, w1] {
            for t in [0.2, 0.7] {
                assert!(w.value(t) > 0.0);
                assert!(((w.value(t + h) - w.value(t - h)) / (2.0 * h) - w.deriv(t)).abs() < 1e-8);
            }
        }
    }

    #[test]
    fn importance_weight_outside_support() {
        let q = TimeDistribution::one_sided(0.01);
        assert!(matches!(q.importance_weight(0.0), Err(Error::ImportanceWeight { .. })));
        assert!((q.importance_weight(0.5).unwrap() - 0.98).abs() < 1e-15);
    }

    fn ks_stat(q: &TimeDistribution, n: usize, seed: u64) -> f64 {
        let mut rng = Rng::new(seed);
        let mut xs: Vec<f64> = (0..n).map(|_| q.sample(&mut rng)).collect();
        xs.sort_by(f64::total_cmp);
        xs.iter()
            .enumerate()
            .map(|(i, &x)| {
                let f = q.cdf(x);
                (f - i as f64 / n as f64).abs().max((f - (i + 1) as f64 / n as f64).abs())
            })
            .fold(0.0, f64::max)
    }

    #[test]
    fn sampler_matches_density() {
        // 1% critical value of the one-sample KS statistic is about 1.63 / sqrt(n)
        let n = 20_000;
        for q in [
            TimeDistribution::one_sided(0.01),
            TimeDistribution::Triangular { lo: 0.0, hi: 1.0, mode: 0.3 },
        ] {
            assert!(ks_stat(&q, n, 2) < 1.63 / (n as f64).sqrt());
            // density integrates to one
            let k = 10_000;
            let (lo, hi) = q.bounds();
            let h = (hi - lo) / k as f64;
            let total: f64 = (0..k).map(|i| q.density(lo + (i as f64 + 0.5) * h) * h).sum();
            assert!((total - 1.0).abs() < 1e-6);
        }
    }

    proptest! {
        #[test]
        fn g_is_strictly_convex(a in -50.0f64..50.0) {
            for g in [BregmanG::Quadratic, BregmanG::QuarticStrict] {
                prop_assert!(g.d2(a) > 0.0);
            }
        }

        #[test]
        fn divergence_nonnegative(a in -5.0f64..5.0, b in -5.0f64..5.0) {
            for g in [BregmanG::Quadratic, BregmanG::QuarticStrict] {
                prop_assert!(g.divergence(a, b) >= -1e-12);
            }
        }
    }
}

//! Parameterised score functions `s(x, t)` and the derivatives the risks use.

mod linear;
mod mlp;

use std::path::Path;

use serde::{Deserialize, Serialize};

pub use linear::LinearScoreModel;
pub use mlp::MlpScoreModel;

use crate::bridges::BridgePath;
use crate::error::{Error, Result};
use crate::features::FeatureMap;

/// Value of `s` and its directional derivative `∇_x s · dx + ∂_t s · dt`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Jet {
    pub value: f64,
    pub tangent: f64,
}

pub trait ScoreModel: Send + Sync + std::fmt::Debug {
    fn x_dim(&self) -> usize;
    fn num_params(&self) -> usize;
    fn params(&self) -> &[f64];
    fn params_mut(&mut self) -> &mut [f64];

    fn jet(&self, x: &[f64], t: f64, dx: &[f64], dt: f64) -> Jet;

    /// Add `gv · ∂value/∂θ + gd · ∂tangent/∂θ` of the jet at `(x, t, dx, dt)`
    /// into `grad`.
    #[allow(clippy::too_many_arguments)]
    fn jet_param_grad(&self, x: &[f64], t: f64, dx: &[f64], dt: f64, gv: f64, gd: f64, grad: &mut [f64]);

    fn checkpoint(&self) -> Checkpoint;

    fn eval(&self, x: &[f64], t: f64) -> f64 {
        self.jet(x, t, &vec![0.0; x.len()], 0.0).value
    }

    fn partial_t(&self, x: &[f64], t: f64) -> f64 {
        self.jet(x, t, &vec![0.0; x.len()], 1.0).tangent
    }

    fn grad_x(&self, x: &[f64], t: f64) -> Vec<f64> {
        let mut dx = vec![0.0; x.len()];
        (0..x.len())
            .map(|k| {
                dx[k] = 1.0;
                let g = self.jet(x, t, &dx, 0.0).tangent;
                dx[k] = 0.0;
                g
            })
            .collect()
    }

    fn as_linear(&self) -> Option<&LinearScoreModel> {
        None
    }
}

/// `d/dt s(X_t, t) = ∂_t s + Ẋ_t · ∇_x s` along a bridge path.
pub fn total_time_derivative(model: &dyn ScoreModel, path: &BridgePath, t: f64) -> f64 {
    let x = path.position(t);
    let v = path.velocity(t);
    model.jet(&x, t, &v, 1.0).tangent
}

/// A point and direction at which a loss reads the model.
#[derive(Debug, Clone, PartialEq)]
pub struct Probe {
    pub x: Vec<f64>,
    pub t: f64,
    pub dx: Vec<f64>,
    pub dt: f64,
}

impl Probe {
    pub fn at(x: Vec<f64>, t: f64) -> Self {
        let dx = vec![0.0; x.len()];
        Self { x, t, dx, dt: 0.0 }
    }
}

/// Parameter gradient of `Σ_i f_i(jet_i)` where `dloss(i, jet_i)` returns
/// `(∂f_i/∂value, ∂f_i/∂tangent)`. The step index of a non-finite error is
/// left at zero for the caller to fill in.
pub fn param_grad<F>(model: &dyn ScoreModel, probes: &[Probe], dloss: F) -> Result<Vec<f64>>
where
    F: Fn(usize, Jet) -> (f64, f64),
{
    let mut grad = vec![0.0; model.num_params()];
    for (i, p) in probes.iter().enumerate() {
        let jet = model.jet(&p.x, p.t, &p.dx, p.dt);
        let (gv, gd) = dloss(i, jet);
        model.jet_param_grad(&p.x, p.t, &p.dx, p.dt, gv, gd, &mut grad);
    }
    if grad.iter().all(|g| g.is_finite()) {
        Ok(grad)
    } else {
        Err(Error::NonFinite { step: 0 })
    }
}

/// Serialised model: kind, architecture and flat parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Checkpoint {
    Linear { features: FeatureMap, params: Vec<f64> },
    Mlp { input_dim: usize, widths: Vec<usize>, params: Vec<f64> },
}

impl Checkpoint {
    pub fn into_model(self) -> Result<Box<dyn ScoreModel>> {
        match self {
            Checkpoint::Linear { features, params } => {
                Ok(Box::new(LinearScoreModel::with_params(features, params)?))
            }
            Checkpoint::Mlp { input_dim, widths, params } => {
                Ok(Box::new(MlpScoreModel::with_params(input_dim, widths, params)?))
            }
        }
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        std::fs::write(path, serde_json::to_string(self)?)?;
        Ok(())
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Ok(serde_json::from_str(&std::fs::read_to_string(path)?)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::bridges::ScheduleKind;
    use crate::features::TBasis;
    use crate::rng::Rng;

    fn path() -> BridgePath {
        BridgePath { schedule: ScheduleKind::LinearOneSided, base: vec![0.0], pos: vec![2.0], neg: vec![], bridged: 1 }
    }

    #[test]
    fn total_derivative_examples() {
        // s(x, t) = t
        let m = LinearScoreModel::with_params(
            FeatureMap::polynomial(1, 0, TBasis::Monomial { degree: 1 }, false).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_eq!(total_time_derivative(&m, &path(), 0.3), 1.0);
        // s(x, t) = x
        let m = LinearScoreModel::with_params(
            FeatureMap::polynomial(1, 1, TBasis::Monomial { degree: 0 }, false).unwrap(),
            vec![0.0, 1.0],
        )
        .unwrap();
        assert_eq!(total_time_derivative(&m, &path(), 0.3), 2.0);
    }

    #[test]
    fn total_derivative_matches_finite_differences() {
        let map = FeatureMap::polynomial(2, 3, TBasis::Legendre { degree: 3, lo: 0.0, hi: 1.0 }, false).unwrap();
        let mut rng = Rng::new(4);
        let h = 1e-6;
        for _ in 0..100 {
            let w: Vec<f64> = (0..map.len()).map(|_| rng.normal() * 0.3).collect();
            let m = LinearScoreModel::with_params(map.clone(), w).unwrap();
            let p = BridgePath {
                schedule: ScheduleKind::LinearOneSided,
                base: vec![rng.normal(), rng.normal()],
                pos: vec![rng.normal() + 2.0, rng.normal()],
                neg: vec![],
                bridged: 2,
            };
            let t = rng.uniform_in(0.05, 0.95);
            let f = |t: f64| m.eval(&p.position(t), t);
            let fd = (f(t + h) - f(t - h)) / (2.0 * h);
            assert!((fd - total_time_derivative(&m, &p, t)).abs() < 1e-5);
        }
    }

    #[test]
    fn param_grad_quadratic_example() {
        let map = FeatureMap::polynomial(1, 2, TBasis::Monomial { degree: 1 }, false).unwrap();
        let m = LinearScoreModel::zeros(map.clone());
        let probe = Probe::at(vec![0.7], 0.4);
        let target = 1.3;
        let g = param_grad(&m, std::slice::from_ref(&probe), |_, j| (2.0 * (j.value - target), 0.0)).unwrap();
        let phi = map.eval(&probe.x, probe.t);
        for (gi, fi) in g.iter().zip(&phi) {
            assert!((gi + 2.0 * target * fi).abs() < 1e-15);
        }
        assert!(param_grad(&m, &[], |_, _| (1.0, 1.0)).unwrap().iter().all(|&g| g == 0.0));
    }

    #[test]
    fn checkpoint_round_trip() {
        let map = FeatureMap::polynomial(1, 2, TBasis::Monomial { degree: 2 }, true).unwrap();
        let lin = LinearScoreModel::with_params(map.clone(), (0..map.len()).map(|i| i as f64 * 0.1).collect()).unwrap();
        let mlp = MlpScoreModel::new(2, vec![5, 4], 3).unwrap();
        let dir = tempfile::tempdir().unwrap();
        for (i, m) in [&lin as &dyn ScoreModel, &mlp].into_iter().enumerate() {
            let path = dir.path().join(format!("m{i}.json"));
            m.checkpoint().save(&path).unwrap();
            let back = Checkpoint::load(&path).unwrap().into_model().unwrap();
            for t in [-0.5, 0.2] {
                let x = vec![0.3; m.x_dim()];
                assert_eq!(back.eval(&x, t).to_bits(), m.eval(&x, t).to_bits());
            }
        }
    }
}

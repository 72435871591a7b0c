use std::cell::RefCell;

use super::{Checkpoint, Jet, ScoreModel};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, Scratch};

/// `s(x, t) = Σ_j w_j φ_j(x, t)`.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearScoreModel {
    features: FeatureMap,
    w: Vec<f64>,
}

thread_local! {
    static BUF: RefCell<(Vec<f64>, Vec<f64>, Scratch)> = RefCell::new(Default::default());
}

impl LinearScoreModel {
    pub fn zeros(features: FeatureMap) -> Self {
        let w = vec![0.0; features.len()];
        Self { features, w }
    }

    pub fn with_params(features: FeatureMap, w: Vec<f64>) -> Result<Self> {
        if w.len() != features.len() {
            return Err(Error::Validation(format!(
                "expected {} weights, got {}",
                features.len(),
                w.len()
            )));
        }
        Ok(Self { features, w })
    }

    pub fn features(&self) -> &FeatureMap {
        &self.features
    }

    pub fn weights(&self) -> &[f64] {
        &self.w
    }

    fn with_jet<R>(&self, x: &[f64], t: f64, dx: &[f64], dt: f64, f: impl FnOnce(&[f64], &[f64]) -> R) -> R {
        BUF.with(|cell| {
            let mut guard = cell.borrow_mut();
            let (val, tan, scratch) = &mut *guard;
            val.resize(self.w.len(), 0.0);
            tan.resize(self.w.len(), 0.0);
            self.features.jet_into(x, t, dx, dt, val, tan, scratch);
            f(val, tan)
        })
    }
}

impl ScoreModel for LinearScoreModel {
    fn x_dim(&self) -> usize {
        self.features.x_dim()
    }

    fn num_params(&self) -> usize {
        self.w.len()
    }

    fn params(&self) -> &[f64] {
        &self.w
    }

    fn params_mut(&mut self) -> &mut [f64] {
        &mut self.w
    }

    fn jet(&self, x: &[f64], t: f64, dx: &[f64], dt: f64) -> Jet {
        let (start, len) = self.features.active_range(t);
        self.with_jet(x, t, dx, dt, |val, tan| {
            let w = &self.w[start..start + len];
            Jet {
                value: w.iter().zip(&val[start..start + len]).map(|(a, b)| a * b).sum(),
                tangent: w.iter().zip(&tan[start..start + len]).map(|(a, b)| a * b).sum(),
            }
        })
    }

    fn jet_param_grad(&self, x: &[f64], t: f64, dx: &[f64], dt: f64, gv: f64, gd: f64, grad: &mut [f64]) {
        let (start, len) = self.features.active_range(t);
        self.with_jet(x, t, dx, dt, |val, tan| {
            for j in start..start + len {
                grad[j] += gv * val[j] + gd * tan[j];
            }
        })
    }

    fn checkpoint(&self) -> Checkpoint {
        Checkpoint::Linear { features: self.features.clone(), params: self.w.clone() }
    }

    fn as_linear(&self) -> Option<&LinearScoreModel> {
        Some(self)
    }
}

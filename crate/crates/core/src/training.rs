//! Adam training loop with deterministic replay, and closed-form fits for
//! linear score models.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::{Error, Result};
use crate::features::FeatureMap;
use crate::losses::{bregman_newton_system, BregmanG, QuadForm, TimeBatch, TsmSettings};
use crate::rng::Rng;
use crate::score_model::{LinearScoreModel, ScoreModel};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HistoryEntry {
    pub step: usize,
    pub loss_ema: f64,
}

/// Adam with bias correction.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    m: Vec<f64>,
    v: Vec<f64>,
    t: u64,
}

impl Adam {
    pub fn new(p: usize, lr: f64) -> Self {
        Self { lr, beta1: 0.9, beta2: 0.999, eps: 1e-8, m: vec![0.0; p], v: vec![0.0; p], t: 0 }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64]) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t as i32);
        let c2 = 1.0 - self.beta2.powi(self.t as i32);
        for i in 0..params.len() {
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * grad[i];
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * grad[i] * grad[i];
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= self.lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Mutable state of a training run.
#[derive(Debug, Clone)]
pub struct TrainState {
    pub step: usize,
    pub adam: Adam,
    pub loss_ema: Option<f64>,
    pub history: Vec<HistoryEntry>,
}

const EMA_DECAY: f64 = 0.98;
const HISTORY_EVERY: usize = 100;

fn finite(loss: f64, grad: &[f64]) -> bool {
    loss.is_finite() && grad.iter().all(|g| g.is_finite())
}

/// Run `cfg.steps` Adam steps on `loss`, which returns the minibatch loss and
/// gradient at the current parameters. When a step produces a non-finite
/// loss or gradient, the previous update is redone once with half the
/// learning rate; a second failure aborts with the step index.
pub fn train<M, L>(model: &mut M, cfg: &RunConfig, rng: &mut Rng, mut loss: L) -> Result<TrainState>
where
    M: ScoreModel + ?Sized,
    L: FnMut(&M, &mut Rng) -> Result<(f64, Vec<f64>)>,
{
    cfg.validate()?;
    let mut state = TrainState {
        step: 0,
        adam: Adam::new(model.num_params(), cfg.learning_rate),
        loss_ema: None,
        history: Vec::new(),
    };
    let mut retried = false;
    // parameters and optimiser before the last update, and that update's gradient
    let mut undo: Option<(Vec<f64>, Adam, Vec<f64>)> = None;
    while state.step < cfg.steps {
        let step = state.step + 1;
        let snapshot = rng.clone();
        let (mut l, mut g) = loss(model, rng)?;
        if !finite(l, &g) {
            match (&undo, retried) {
                (Some((params, adam, grad)), false) => {
                    retried = true;
                    model.params_mut().copy_from_slice(params);
                    state.adam = adam.clone();
                    state.adam.lr *= 0.5;
                    let grad = grad.clone();
                    state.adam.step(model.params_mut(), &grad);
                    *rng = snapshot;
                    (l, g) = loss(model, rng)?;
                    if !finite(l, &g) {
                        return Err(Error::NonFinite { step });
                    }
                }
                _ => return Err(Error::NonFinite { step }),
            }
        }
        undo = Some((model.params().to_vec(), state.adam.clone(), g.clone()));
        state.adam.step(model.params_mut(), &g);
        if model.params().iter().any(|p| !p.is_finite()) {
            return Err(Error::NonFinite { step });
        }
        state.step = step;
        let ema = state.loss_ema.map_or(l, |e| EMA_DECAY * e + (1.0 - EMA_DECAY) * l);
        state.loss_ema = Some(ema);
        if step % HISTORY_EVERY == 0 || step == cfg.steps {
            state.history.push(HistoryEntry { step, loss_ema: ema });
        }
    }
    Ok(state)
}

fn solve(mut a: DMatrix<f64>, b: DVector<f64>) -> Result<Vec<f64>> {
    let p = b.len();
    if let Some(ch) = a.clone().cholesky() {
        return Ok(ch.solve(&b).iter().copied().collect());
    }
    for i in 0..p {
        if !a[(i, i)].is_finite() {
            return Err(Error::Singular("non-finite system".into()));
        }
    }
    a.fill_lower_triangle_with_upper_triangle();
    let w = a.lu().solve(&b).ok_or_else(|| Error::Singular(format!("{p}x{p} system")))?;
    if w.iter().all(|v| v.is_finite()) {
        Ok(w.iter().copied().collect())
    } else {
        Err(Error::Singular(format!("{p}x{p} system")))
    }
}

/// Minimiser of `½ wᵀ(A/n)w + (b/n)ᵀw + ridge·|w|²`.
pub fn closed_form_weights(q: &QuadForm, ridge: f64) -> Result<Vec<f64>> {
    if !(ridge > 0.0) {
        return Err(Error::Validation("ridge must be positive".into()));
    }
    let (a, b) = q.normalized();
    let mut m = DMatrix::from_row_slice(q.p, q.p, &a);
    for i in 0..q.p {
        m[(i, i)] += 2.0 * ridge;
    }
    solve(m, -DVector::from_vec(b))
}

/// Fit a linear score model in one solve.
pub fn closed_form_fit(features: &FeatureMap, q: &QuadForm, ridge: f64) -> Result<LinearScoreModel> {
    if features.len() != q.p {
        return Err(Error::Validation("feature count does not match the quadratic form".into()));
    }
    LinearScoreModel::with_params(features.clone(), closed_form_weights(q, ridge)?)
}

/// Damped Newton iterations on the Bregman risk of a linear model over a
/// fixed batch, plus `ridge·|w|²`.
pub fn newton_fit_bregman(
    model: &mut LinearScoreModel,
    batch: &TimeBatch,
    set: &TsmSettings,
    g: BregmanG,
    ridge: f64,
    iters: usize,
) -> Result<f64> {
    let features = model.features().clone();
    let p = features.len();
    let objective = |w: &[f64]| -> Result<(f64, Vec<f64>, Vec<f64>)> {
        let (l, mut gr, mut h) = bregman_newton_system(&features, w, batch, set, g)?;
        for i in 0..p {
            gr[i] += 2.0 * ridge * w[i];
            h[i * p + i] += 2.0 * ridge;
        }
        Ok((l + ridge * w.iter().map(|v| v * v).sum::<f64>(), gr, h))
    };
    let mut w = model.weights().to_vec();
    let (mut cur, mut gr, mut h) = objective(&w)?;
    for _ in 0..iters {
        let m = DMatrix::from_row_slice(p, p, &h);
        let step = m.lu().solve(&DVector::from_vec(gr.clone())).ok_or_else(|| Error::Singular("Newton system".into()))?;
        let mut scale = 1.0;
        let mut accepted = false;
        for _ in 0..30 {
            let trial: Vec<f64> = w.iter().zip(step.iter()).map(|(a, s)| a - scale * s).collect();
            let next = objective(&trial)?;
            if next.0.is_finite() && next.0 <= cur {
                w = trial;
                (cur, gr, h) = next;
                accepted = true;
                break;
            }
            scale *= 0.5;
        }
        if !accepted {
            break;
        }
    }
    model.params_mut().copy_from_slice(&w);
    Ok(cur)
}

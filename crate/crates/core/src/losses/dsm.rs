//! Denoising score matching over `(D + σε, Z)` with `λ(σ) = σ²`.

use super::tsm::QuadForm;
use super::Risk;
use crate::data::{Dataset, TreatmentKind};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, Scratch};
use crate::par;
use crate::rng::Rng;
use crate::score_model::ScoreModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DsmSettings {
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Use each noise draw twice, as `ε` and `-ε`.
    pub antithetic: bool,
    /// Fold noisy treatments back into `[-1, 1]`.
    pub reflect: bool,
}

impl DsmSettings {
    pub fn new(sigma_min: f64, sigma_max: f64) -> Self {
        Self { sigma_min, sigma_max, antithetic: true, reflect: false }
    }

    pub fn validate(&self) -> Result<()> {
        if self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite() {
            Ok(())
        } else {
            Err(Error::Validation(format!(
                "need 0 < sigma_min <= sigma_max, got [{}, {}]",
                self.sigma_min, self.sigma_max
            )))
        }
    }

    /// Log-uniform draw on `[sigma_min, sigma_max]`.
    pub fn sample_sigma(&self, rng: &mut Rng) -> f64 {
        let (a, b) = (self.sigma_min.ln(), self.sigma_max.ln());
        (a + (b - a) * rng.uniform()).exp()
    }

    fn noisy(&self, d: f64, sigma: f64, eps: f64) -> f64 {
        let v = d + sigma * eps;
        if self.reflect {
            reflect_boundary(v)
        } else {
            v
        }
    }

    fn signs(&self) -> &'static [f64] {
        if self.antithetic {
            &[1.0, -1.0]
        } else {
            &[1.0]
        }
    }
}

/// Fold the real line onto `[-1, 1]` by repeated reflection at `±1`.
pub fn reflect_boundary(v: f64) -> f64 {
    let y = (v + 1.0).rem_euclid(4.0);
    (if y > 2.0 { 4.0 - y } else { y }) - 1.0
}

fn check_dataset(ds: &Dataset) -> Result<()> {
    if ds.kind() != TreatmentKind::Continuous {
        return Err(Error::Validation("denoising score matching needs a continuous treatment".into()));
    }
    Ok(())
}

/// `E[σ² (s(D + σε, Z, σ) + ε/σ)²]` over rows drawn with replacement.
pub fn dsm_risk(model: &dyn ScoreModel, ds: &Dataset, set: &DsmSettings, batch: usize, rng: &mut Rng) -> Result<Risk> {
    set.validate()?;
    check_dataset(ds)?;
    let mut grad = vec![0.0; model.num_params()];
    let mut records = Vec::with_capacity(batch);
    let mut x = vec![0.0; ds.dz() + 1];
    let zeros = vec![0.0; ds.dz() + 1];
    for _ in 0..batch {
        let i = rng.index(ds.n());
        let sigma = set.sample_sigma(rng);
        let eps = rng.normal();
        let signs = set.signs();
        let mut rec = 0.0;
        for &sg in signs {
            let e = sg * eps;
            x[0] = set.noisy(ds.d(i), sigma, e);
            x[1..].copy_from_slice(ds.z(i));
            let r = model.eval(&x, sigma) + e / sigma;
            let lam = sigma * sigma;
            rec += lam * r * r / signs.len() as f64;
            model.jet_param_grad(&x, sigma, &zeros, 0.0, 2.0 * lam * r / signs.len() as f64, 0.0, &mut grad);
        }
        records.push(rec);
    }
    let n = batch.max(1) as f64;
    for g in &mut grad {
        *g /= n;
    }
    let loss = if batch == 0 { 0.0 } else { records.iter().sum::<f64>() / n };
    Ok(Risk { loss, grad, records })
}

const ROWS_PER_CHUNK: usize = 256;

/// Quadratic form of the denoising risk of a linear model, with `reps` noise
/// draws for every row; rows are chunked on independent streams of `seed`.
pub fn dsm_quad_form(features: &FeatureMap, ds: &Dataset, set: &DsmSettings, reps: usize, seed: u64) -> Result<QuadForm> {
    set.validate()?;
    check_dataset(ds)?;
    if features.x_dim() != ds.dz() + 1 {
        return Err(Error::Validation("feature dimension must be 1 + dz".into()));
    }
    let p = features.len();
    let chunks = par::chunks(ds.n(), ROWS_PER_CHUNK);
    let parts = par::map_indexed(chunks.len(), |k| {
        let (start, len) = chunks[k];
        let mut rng = Rng::stream(seed, k as u64);
        let mut q = QuadForm::new(p);
        let (mut val, mut tan, mut scratch) = (vec![0.0; p], vec![0.0; p], Scratch::default());
        let mut x = vec![0.0; ds.dz() + 1];
        let zeros = vec![0.0; ds.dz() + 1];
        for i in start..start + len {
            for _ in 0..reps {
                let sigma = set.sample_sigma(&mut rng);
                let eps = rng.normal();
                for &sg in set.signs() {
                    let e = sg * eps;
                    x[0] = set.noisy(ds.d(i), sigma, e);
                    x[1..].copy_from_slice(ds.z(i));
                    features.jet_into(&x, sigma, &zeros, 0.0, &mut val, &mut tan, &mut scratch);
                    let lam = sigma * sigma;
                    q.add_outer(2.0 * lam, &val, 0, p);
                    q.add_linear(2.0 * lam * e / sigma, &val, 0, p);
                    q.n += 1.0;
                }
            }
        }
        q
    });
    let mut q = QuadForm::new(p);
    for part in &parts {
        q.merge(part);
    }
    Ok(q)
}

//! Time score matching risks.
//!
//! One record holds a bridge path and an interior time. With control-variate
//! weight `c`, the interior term reads the model along the direction
//! `(dx, dt) = (-c Ẋ_t, 1 - c)` and the boundary terms are scaled by `1 - c`.
//! The subtracted quantity is the path-wise identity
//! `λ(b)s(X_b) - λ(a)s(X_a) = ∫ d/dt[λ s(X_t, t)] dt`, so every `c` targets
//! the same risk; `c = 0` is the plain estimator.

use super::{BregmanG, Risk, TimeDistribution, WeightFn};
use crate::bridges::{BridgePath, BridgeSampler, TimeScoreOracle};
use crate::error::{Error, Result};
use crate::features::{FeatureMap, Scratch};
use crate::par;
use crate::rng::Rng;
use crate::score_model::ScoreModel;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TsmSettings {
    pub lambda: WeightFn,
    pub control_variate: f64,
}

impl TsmSettings {
    pub fn plain(lambda: WeightFn) -> Self {
        Self { lambda, control_variate: 0.0 }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeRecord {
    pub path: BridgePath,
    /// Interior time; on two-sided bridges the record is used at `±tau`.
    pub tau: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TimeBatch {
    pub records: Vec<TimeRecord>,
    pub time: TimeDistribution,
    pub two_sided: bool,
}

pub fn draw_time_batch(
    sampler: &BridgeSampler,
    time: &TimeDistribution,
    batch: usize,
    rng: &mut Rng,
) -> Result<TimeBatch> {
    time.validate()?;
    let (lo, hi) = time.bounds();
    let (dlo, dhi) = if sampler.schedule.is_two_sided() { (0.0, 1.0) } else { sampler.schedule.domain() };
    if lo < dlo || hi > dhi {
        return Err(Error::Domain { t: if lo < dlo { lo } else { hi }, lo: dlo, hi: dhi });
    }
    let records = (0..batch)
        .map(|_| {
            let path = sampler.draw_path(rng);
            let tau = time.sample(rng);
            TimeRecord { path, tau }
        })
        .collect();
    Ok(TimeBatch { records, time: *time, two_sided: sampler.schedule.is_two_sided() })
}

/// Boundary evaluation points `(t, coefficient)` before the `1 - c` factor.
/// Two-sided records list the jump at zero as `(+0, λ(0))` and `(-0, -λ(0))`.
fn boundary_points(batch: &TimeBatch, lambda: &WeightFn) -> Vec<(f64, f64)> {
    let (lo, hi) = batch.time.bounds();
    if batch.two_sided {
        vec![
            (-hi, lambda.value(-hi)),
            (hi, -lambda.value(hi)),
            (0.0, lambda.value(0.0)),
            (-0.0, -lambda.value(0.0)),
        ]
    } else {
        vec![(lo, lambda.value(lo)), (hi, -lambda.value(hi))]
    }
}

fn interior_times(batch: &TimeBatch, tau: f64) -> Vec<f64> {
    if batch.two_sided {
        vec![tau, -tau]
    } else {
        vec![tau]
    }
}

/// `Σ coef · h(s(X_t, t))` over the boundary points, with `h` returning the
/// value and derivative.
fn boundary_sum<H: Fn(f64) -> (f64, f64)>(
    model: &dyn ScoreModel,
    path: &BridgePath,
    points: &[(f64, f64)],
    scale: f64,
    h: H,
    mut grad: Option<&mut [f64]>,
) -> f64 {
    if scale == 0.0 {
        return 0.0;
    }
    let zeros = vec![0.0; path.base.len()];
    let mut total = 0.0;
    for &(t, coef) in points {
        let coef = coef * scale;
        if coef == 0.0 {
            continue;
        }
        let x = path.position(t);
        let s = model.jet(&x, t, &zeros, 0.0).value;
        let (v, dv) = h(s);
        total += coef * v;
        if let Some(g) = grad.as_deref_mut() {
            model.jet_param_grad(&x, t, &zeros, 0.0, coef * dv, 0.0, g);
        }
    }
    total
}

fn direction(path: &BridgePath, t: f64, c: f64) -> (Vec<f64>, Vec<f64>) {
    let x = path.position(t);
    let mut v = path.velocity(t);
    for vi in &mut v {
        *vi *= -c;
    }
    (x, v)
}

fn tsm_record(
    model: &dyn ScoreModel,
    batch: &TimeBatch,
    rec: &TimeRecord,
    set: &TsmSettings,
    points: &[(f64, f64)],
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let c = set.control_variate;
    let lam = &set.lambda;
    let w = batch.time.importance_weight(rec.tau)?;
    let mut total = boundary_sum(model, &rec.path, points, 1.0 - c, |s| (s, 1.0), grad.as_deref_mut());
    for t in interior_times(batch, rec.tau) {
        let (x, dx) = direction(&rec.path, t, c);
        let (l, lp) = (lam.value(t), lam.deriv(t));
        let jet = model.jet(&x, t, &dx, 1.0 - c);
        total += w * ((1.0 - c) * lp * jet.value + l * jet.tangent + 0.5 * l * jet.value * jet.value);
        if let Some(g) = grad.as_deref_mut() {
            let gv = w * ((1.0 - c) * lp + l * jet.value);
            model.jet_param_grad(&x, t, &dx, 1.0 - c, gv, w * l, g);
        }
    }
    Ok(total)
}

fn bregman_record(
    model: &dyn ScoreModel,
    batch: &TimeBatch,
    rec: &TimeRecord,
    set: &TsmSettings,
    g: BregmanG,
    points: &[(f64, f64)],
    mut grad: Option<&mut [f64]>,
) -> Result<f64> {
    let c = set.control_variate;
    let lam = &set.lambda;
    let w = batch.time.importance_weight(rec.tau)?;
    let mut total = boundary_sum(model, &rec.path, points, 1.0 - c, |s| (g.d1(s), g.d2(s)), grad.as_deref_mut());
    for t in interior_times(batch, rec.tau) {
        let (x, dx) = direction(&rec.path, t, c);
        let (l, lp) = (lam.value(t), lam.deriv(t));
        let jet = model.jet(&x, t, &dx, 1.0 - c);
        let (s, tan) = (jet.value, jet.tangent);
        // λ' g'(s) + λ ∂_t g'(s) + λ (g'(s) s - g(s)), with ∂_t g'(s) = g''(s) ∂_t s
        total += w * ((1.0 - c) * lp * g.d1(s) + l * g.d2(s) * tan + l * (g.d1(s) * s - g.g(s)));
        if let Some(gr) = grad.as_deref_mut() {
            let gv = w * ((1.0 - c) * lp * g.d2(s) + l * g.d3(s) * tan + l * g.d2(s) * s);
            let gd = w * l * g.d2(s);
            model.jet_param_grad(&x, t, &dx, 1.0 - c, gv, gd, gr);
        }
    }
    Ok(total)
}

fn reduce<F>(model: &dyn ScoreModel, batch: &TimeBatch, mut per_record: F) -> Result<Risk>
where
    F: FnMut(&TimeRecord, &mut [f64]) -> Result<f64>,
{
    let mut grad = vec![0.0; model.num_params()];
    let mut records = Vec::with_capacity(batch.records.len());
    for rec in &batch.records {
        records.push(per_record(rec, &mut grad)?);
    }
    let n = records.len().max(1) as f64;
    for g in &mut grad {
        *g /= n;
    }
    let loss = if records.is_empty() { 0.0 } else { records.iter().sum::<f64>() / n };
    Ok(Risk { loss, grad, records })
}

/// Time score matching risk on a fixed batch.
pub fn tsm_risk_on(model: &dyn ScoreModel, batch: &TimeBatch, set: &TsmSettings) -> Result<Risk> {
    let points = boundary_points(batch, &set.lambda);
    reduce(model, batch, |rec, g| tsm_record(model, batch, rec, set, &points, Some(g)))
}

/// Draw a batch of bridge records and evaluate the time score matching risk.
pub fn tsm_risk(
    model: &dyn ScoreModel,
    sampler: &BridgeSampler,
    set: &TsmSettings,
    time: &TimeDistribution,
    batch: usize,
    rng: &mut Rng,
) -> Result<Risk> {
    let b = draw_time_batch(sampler, time, batch, rng)?;
    tsm_risk_on(model, &b, set)
}

/// [`tsm_risk`] restricted to two-sided bridges on `[-1, 1]`.
pub fn two_sided_tsm_risk(
    model: &dyn ScoreModel,
    sampler: &BridgeSampler,
    set: &TsmSettings,
    time: &TimeDistribution,
    batch: usize,
    rng: &mut Rng,
) -> Result<Risk> {
    if !sampler.schedule.is_two_sided() {
        return Err(Error::Validation("two-sided risk needs a two-sided bridge".into()));
    }
    tsm_risk(model, sampler, set, time, batch, rng)
}

pub fn bregman_risk_on(model: &dyn ScoreModel, batch: &TimeBatch, set: &TsmSettings, g: BregmanG) -> Result<Risk> {
    let points = boundary_points(batch, &set.lambda);
    reduce(model, batch, |rec, gr| bregman_record(model, batch, rec, set, g, &points, Some(gr)))
}

/// Bregman-divergence risk up to a model-independent constant.
pub fn bregman_risk(
    model: &dyn ScoreModel,
    sampler: &BridgeSampler,
    set: &TsmSettings,
    g: BregmanG,
    time: &TimeDistribution,
    batch: usize,
    rng: &mut Rng,
) -> Result<Risk> {
    let b = draw_time_batch(sampler, time, batch, rng)?;
    bregman_risk_on(model, &b, set, g)
}

/// `½ λ(t) (∂_t log p_t(X_t) - s(X_t, t))² / q(t)` averaged over the batch.
/// This is half the squared-error risk, the scaling under which it differs
/// from [`tsm_risk`] by a constant.
pub fn tsm_risk_oracle_on(
    model: &dyn ScoreModel,
    oracle: &dyn TimeScoreOracle,
    batch: &TimeBatch,
    lambda: &WeightFn,
) -> Result<Risk> {
    reduce(model, batch, |rec, g| {
        let w = batch.time.importance_weight(rec.tau)?;
        let mut total = 0.0;
        for t in interior_times(batch, rec.tau) {
            let x = rec.path.position(t);
            let zeros = vec![0.0; x.len()];
            let r = oracle.time_score(&x, t)? - model.eval(&x, t);
            let l = lambda.value(t);
            total += 0.5 * w * l * r * r;
            model.jet_param_grad(&x, t, &zeros, 0.0, -w * l * r, 0.0, g);
        }
        Ok(total)
    })
}

pub fn tsm_risk_oracle(
    model: &dyn ScoreModel,
    oracle: &dyn TimeScoreOracle,
    sampler: &BridgeSampler,
    lambda: &WeightFn,
    time: &TimeDistribution,
    batch: usize,
    rng: &mut Rng,
) -> Result<Risk> {
    let b = draw_time_batch(sampler, time, batch, rng)?;
    tsm_risk_oracle_on(model, oracle, &b, lambda)
}

/// Sufficient statistics of a risk that is quadratic in linear weights:
/// `risk(w) = ½ wᵀ (A / n) w + (b / n)ᵀ w + const`.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadForm {
    pub p: usize,
    /// Row-major; only the upper triangle is accumulated until
    /// [`QuadForm::symmetrize`].
    pub a: Vec<f64>,
    pub b: Vec<f64>,
    pub n: f64,
}

impl QuadForm {
    pub fn new(p: usize) -> Self {
        Self { p, a: vec![0.0; p * p], b: vec![0.0; p], n: 0.0 }
    }

    pub fn add_outer(&mut self, scale: f64, phi: &[f64], start: usize, len: usize) {
        for i in start..start + len {
            let si = scale * phi[i];
            if si == 0.0 {
                continue;
            }
            let row = &mut self.a[i * self.p..(i + 1) * self.p];
            for j in i..start + len {
                row[j] += si * phi[j];
            }
        }
    }

    pub fn add_linear(&mut self, scale: f64, v: &[f64], start: usize, len: usize) {
        for j in start..start + len {
            self.b[j] += scale * v[j];
        }
    }

    pub fn merge(&mut self, other: &QuadForm) {
        for (a, o) in self.a.iter_mut().zip(&other.a) {
            *a += o;
        }
        for (b, o) in self.b.iter_mut().zip(&other.b) {
            *b += o;
        }
        self.n += other.n;
    }

    /// Copy the upper triangle into the lower one.
    pub fn symmetrize(&mut self) {
        for i in 0..self.p {
            for j in 0..i {
                self.a[i * self.p + j] = self.a[j * self.p + i];
            }
        }
    }

    /// Averaged `(A / n, b / n)`, symmetric.
    pub fn normalized(&self) -> (Vec<f64>, Vec<f64>) {
        let mut q = self.clone();
        q.symmetrize();
        let n = self.n.max(1.0);
        (q.a.iter().map(|v| v / n).collect(), q.b.iter().map(|v| v / n).collect())
    }

    /// `½ wᵀ(A/n)w + (b/n)ᵀw`.
    pub fn value(&self, w: &[f64]) -> f64 {
        let (a, b) = self.normalized();
        let mut quad = 0.0;
        for i in 0..self.p {
            for j in 0..self.p {
                quad += w[i] * a[i * self.p + j] * w[j];
            }
        }
        0.5 * quad + b.iter().zip(w).map(|(x, y)| x * y).sum::<f64>()
    }
}

/// Quadratic form of the time score matching risk of a linear model with
/// feature map `features` on a fixed batch.
pub fn tsm_quad_form_on(features: &FeatureMap, batch: &TimeBatch, set: &TsmSettings) -> Result<QuadForm> {
    let p = features.len();
    let c = set.control_variate;
    let lam = &set.lambda;
    let points = boundary_points(batch, lam);
    let mut q = QuadForm::new(p);
    let (mut val, mut tan, mut scratch) = (vec![0.0; p], vec![0.0; p], Scratch::default());
    for rec in &batch.records {
        let w = batch.time.importance_weight(rec.tau)?;
        let zeros = vec![0.0; rec.path.base.len()];
        if c != 1.0 {
            for &(t, coef) in &points {
                let coef = coef * (1.0 - c);
                if coef == 0.0 {
                    continue;
                }
                let x = rec.path.position(t);
                features.jet_into(&x, t, &zeros, 0.0, &mut val, &mut tan, &mut scratch);
                let (s, l) = features.active_range(t);
                q.add_linear(coef, &val, s, l);
            }
        }
        for t in interior_times(batch, rec.tau) {
            let (x, dx) = direction(&rec.path, t, c);
            let (l, lp) = (lam.value(t), lam.deriv(t));
            features.jet_into(&x, t, &dx, 1.0 - c, &mut val, &mut tan, &mut scratch);
            let (s, len) = features.active_range(t);
            q.add_outer(w * l, &val, s, len);
            q.add_linear(w * (1.0 - c) * lp, &val, s, len);
            q.add_linear(w * l, &tan, s, len);
        }
        q.n += 1.0;
    }
    Ok(q)
}

/// Records per streamed chunk in [`tsm_quad_form`].
pub const CHUNK: usize = 4096;

/// Quadratic form over `total` records drawn in chunks; chunk `k` uses the
/// random stream `(seed, k)`, so the result does not depend on scheduling.
pub fn tsm_quad_form(
    features: &FeatureMap,
    sampler: &BridgeSampler,
    set: &TsmSettings,
    time: &TimeDistribution,
    total: usize,
    seed: u64,
) -> Result<QuadForm> {
    let chunks = par::chunks(total, CHUNK);
    let parts = par::map_indexed(chunks.len(), |k| {
        let mut rng = Rng::stream(seed, k as u64);
        let batch = draw_time_batch(sampler, time, chunks[k].1, &mut rng)?;
        tsm_quad_form_on(features, &batch, set)
    });
    let mut q = QuadForm::new(features.len());
    for part in parts {
        q.merge(&part?);
    }
    Ok(q)
}

/// Loss, gradient and Hessian (row-major) of the Bregman risk of a linear
/// model at weights `w` on a fixed batch.
pub fn bregman_newton_system(
    features: &FeatureMap,
    w: &[f64],
    batch: &TimeBatch,
    set: &TsmSettings,
    g: BregmanG,
) -> Result<(f64, Vec<f64>, Vec<f64>)> {
    let p = features.len();
    let c = set.control_variate;
    let lam = &set.lambda;
    let points = boundary_points(batch, lam);
    let (mut loss, mut grad, mut hess) = (0.0, vec![0.0; p], vec![0.0; p * p]);
    let (mut val, mut tan, mut scratch) = (vec![0.0; p], vec![0.0; p], Scratch::default());
    let dot = |a: &[f64]| a.iter().zip(w).map(|(x, y)| x * y).sum::<f64>();
    for rec in &batch.records {
        let wq = batch.time.importance_weight(rec.tau)?;
        let zeros = vec![0.0; rec.path.base.len()];
        for &(t, coef) in &points {
            let coef = coef * (1.0 - c);
            if coef == 0.0 {
                continue;
            }
            let x = rec.path.position(t);
            features.jet_into(&x, t, &zeros, 0.0, &mut val, &mut tan, &mut scratch);
            let s = dot(&val);
            loss += coef * g.d1(s);
            for i in 0..p {
                grad[i] += coef * g.d2(s) * val[i];
                for j in 0..p {
                    hess[i * p + j] += coef * g.d3(s) * val[i] * val[j];
                }
            }
        }
        for t in interior_times(batch, rec.tau) {
            let (x, dx) = direction(&rec.path, t, c);
            let (l, lp) = (lam.value(t), lam.deriv(t));
            features.jet_into(&x, t, &dx, 1.0 - c, &mut val, &mut tan, &mut scratch);
            let (s, tg) = (dot(&val), dot(&tan));
            loss += wq * ((1.0 - c) * lp * g.d1(s) + l * g.d2(s) * tg + l * (g.d1(s) * s - g.g(s)));
            let fs = wq * ((1.0 - c) * lp * g.d2(s) + l * g.d3(s) * tg + l * g.d2(s) * s);
            let ft = wq * l * g.d2(s);
            let fss = wq * ((1.0 - c) * lp * g.d3(s) + l * g.d4(s) * tg + l * (g.d3(s) * s + g.d2(s)));
            let fst = wq * l * g.d3(s);
            for i in 0..p {
                grad[i] += fs * val[i] + ft * tan[i];
                for j in 0..p {
                    hess[i * p + j] += fss * val[i] * val[j] + fst * (val[i] * tan[j] + tan[i] * val[j]);
                }
            }
        }
    }
    let n = batch.records.len().max(1) as f64;
    grad.iter_mut().chain(hess.iter_mut()).for_each(|v| *v /= n);
    Ok((loss / n, grad, hess))
}

mod common;

use common::gaussian_oracle;
use riesz_score::features::{FeatureMap, FeatureSpec, TBasis, XBasis};
use riesz_score::losses::{
    draw_time_batch, tsm_quad_form_on, tsm_risk, tsm_risk_on, tsm_risk_oracle, TimeDistribution, TsmSettings, WeightFn,
};
use riesz_score::score_model::{LinearScoreModel, ScoreModel};
use riesz_score::training::{closed_form_weights, train};
use riesz_score::{Rng, RunConfig};

const EPS: f64 = 0.01;

fn oracle_task_features(t_degree: usize) -> FeatureMap {
    FeatureMap::new(FeatureSpec {
        x: XBasis::Legendre { dim: 1, degree: 3, lo: -1.0, hi: 3.0 },
        t: TBasis::Legendre { degree: t_degree, lo: EPS, hi: 1.0 - EPS },
        split_at_zero: false,
    })
    .unwrap()
}

fn settings() -> TsmSettings {
    TsmSettings { lambda: WeightFn::Constant, control_variate: 1.0 }
}

/// `sqrt(2 R†)`, the λ-weighted RMSE against the oracle time score.
fn oracle_rmse(model: &dyn ScoreModel) -> f64 {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let time = TimeDistribution::one_sided(EPS);
    let r = tsm_risk_oracle(model, &oracle, &sampler, &WeightFn::Constant, &time, 100_000, &mut Rng::new(99)).unwrap();
    (2.0 * r.loss).sqrt()
}

#[test]
fn adam_on_gaussian_oracle_task_reaches_005() {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let time = TimeDistribution::one_sided(EPS);
    let mut model = LinearScoreModel::zeros(oracle_task_features(6));
    let cfg = RunConfig { batch_size: 512, steps: 2000, learning_rate: 1e-2, ..RunConfig::default() };
    let set = settings();
    let state = train(&mut model, &cfg, &mut Rng::new(1), |m, rng| {
        let r = tsm_risk(m, &sampler, &set, &time, cfg.batch_size, rng)?;
        Ok((r.loss, r.grad))
    })
    .unwrap();
    assert_eq!(state.step, 2000);
    let err = oracle_rmse(&model);
    assert!(err < 0.05, "oracle-risk RMSE after 2000 Adam steps at B=512: {err:.4}");
}

#[test]
fn closed_form_matches_long_adam_run_on_fixed_batch() {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let time = TimeDistribution::one_sided(EPS);
    let features = oracle_task_features(3);
    let set = settings();
    let batch = draw_time_batch(&sampler, &time, 4096, &mut Rng::new(2)).unwrap();
    let ridge = 1e-4;
    let w_closed = closed_form_weights(&tsm_quad_form_on(&features, &batch, &set).unwrap(), ridge).unwrap();

    let mut model = LinearScoreModel::zeros(features);
    let cfg = RunConfig { steps: 10_000, learning_rate: 3e-3, ..RunConfig::default() };
    train(&mut model, &cfg, &mut Rng::new(3), |m, _| {
        let r = tsm_risk_on(m, &batch, &set)?;
        let w = m.params();
        let loss = r.loss + ridge * w.iter().map(|v| v * v).sum::<f64>();
        let grad = r.grad.iter().zip(w).map(|(g, v)| g + 2.0 * ridge * v).collect();
        Ok((loss, grad))
    })
    .unwrap();
    let dw = model.weights().iter().zip(&w_closed).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
    assert!(dw < 1e-2, "|w_adam - w_closed| = {dw:.2e}");
}

#[test]
fn loss_ema_settles_over_last_quarter() {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let time = TimeDistribution::one_sided(EPS);
    let mut model = LinearScoreModel::zeros(oracle_task_features(3));
    let cfg = RunConfig { batch_size: 512, steps: 2000, learning_rate: 1e-2, ..RunConfig::default() };
    let set = settings();
    let mut last_se = 0.0;
    let state = train(&mut model, &cfg, &mut Rng::new(4), |m, rng| {
        let r = tsm_risk(m, &sampler, &set, &time, cfg.batch_size, rng)?;
        last_se = r.se();
        Ok((r.loss, r.grad))
    })
    .unwrap();
    let tail: Vec<f64> = state.history.iter().filter(|h| h.step > 1500).map(|h| h.loss_ema).collect();
    for pair in tail.windows(2) {
        assert!(pair[1] <= pair[0] + 3.0 * last_se, "EMA rose from {} to {}", pair[0], pair[1]);
    }
}

#[test]
fn history_is_recorded_every_hundred_steps() {
    let mut model = LinearScoreModel::zeros(oracle_task_features(1));
    let cfg = RunConfig { steps: 250, ..RunConfig::default() };
    let state = train(&mut model, &cfg, &mut Rng::new(5), |m, _| Ok((0.0, vec![0.0; m.num_params()]))).unwrap();
    let steps: Vec<usize> = state.history.iter().map(|h| h.step).collect();
    assert_eq!(steps, vec![100, 200, 250]);
}

mod common;

use common::{all_rows, gaussian_oracle, linspace, SmoothedScore};
use riesz_score::bridges::TimeScoreOracle;
use riesz_score::dml::fit_ate_bridge;
use riesz_score::features::{FeatureMap, FeatureSpec, TBasis, XBasis};
use riesz_score::losses::{draw_time_batch, dsm_risk, BregmanG, DsmSettings, TimeDistribution, TsmSettings, WeightFn};
use riesz_score::riesz::{integrate_time_score, Quadrature};
use riesz_score::score_model::{LinearScoreModel, ScoreModel};
use riesz_score::stats::{mean_se, rmse};
use riesz_score::synth::{generate, DgpSpec};
use riesz_score::training::newton_fit_bregman;
use riesz_score::{Rng, RunConfig};

#[test]
fn quartic_bregman_minimiser_recovers_oracle_score() {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let eps = 0.01;
    let features = FeatureMap::new(FeatureSpec {
        x: XBasis::Legendre { dim: 1, degree: 3, lo: -1.0, hi: 3.0 },
        t: TBasis::Legendre { degree: 6, lo: eps, hi: 1.0 - eps },
        split_at_zero: false,
    })
    .unwrap();
    let batch = draw_time_batch(&sampler, &TimeDistribution::one_sided(eps), 300_000, &mut Rng::new(1)).unwrap();
    let set = TsmSettings { lambda: WeightFn::Constant, control_variate: 1.0 };
    let mut model = LinearScoreModel::zeros(features);
    newton_fit_bregman(&mut model, &batch, &set, BregmanG::QuarticStrict, 1e-9, 30).unwrap();
    let (mut fit, mut truth) = (Vec::new(), Vec::new());
    for x in linspace(-1.0, 3.0, 41) {
        for t in linspace(0.1, 0.9, 17) {
            fit.push(model.eval(&[x], t));
            truth.push(oracle.time_score(&[x], t).unwrap());
        }
    }
    let err = rmse(&fit, &truth);
    assert!(err < 0.05, "grid RMSE {err:.4}");
}

#[test]
fn smoothed_score_beats_random_perturbations() {
    let (ds, _) = generate(&DgpSpec::ame_default(), 20_000, &mut Rng::new(2)).unwrap();
    let set = DsmSettings::new(0.05, 0.5);
    let risk = |m: &SmoothedScore| dsm_risk(m, &ds, &set, 100_000, &mut Rng::new(3)).unwrap().loss;
    let truth = SmoothedScore { c: 0.5, s2: 0.25, bump: vec![0.0; 3] };
    let base = risk(&truth);
    let mut rng = Rng::new(4);
    for _ in 0..20 {
        let raw: Vec<f64> = (0..3).map(|_| rng.normal()).collect();
        let norm = raw.iter().map(|v| v * v).sum::<f64>().sqrt();
        let bump = raw.iter().map(|v| 0.1 * v / norm).collect();
        let other = risk(&SmoothedScore { bump, ..truth.clone() });
        assert!(base < other, "truth {base} vs perturbed {other}");
    }
}

#[test]
fn importance_weighting_is_unbiased() {
    let oracle = gaussian_oracle();
    let sampler = oracle.sampler().unwrap();
    let time = TimeDistribution::Triangular { lo: 0.0, hi: 1.0, mode: 0.3 };
    let batch = draw_time_batch(&sampler, &time, 200_000, &mut Rng::new(5)).unwrap();
    let h = |x: f64, t: f64| x * x * (1.0 + t);
    let draws: Vec<f64> = batch
        .records
        .iter()
        .map(|r| time.importance_weight(r.tau).unwrap() * h(r.path.position(r.tau)[0], r.tau))
        .collect();
    let (est, se) = mean_se(&draws);
    let k = 10_000;
    let riemann = (0..k)
        .map(|i| {
            let t = (i as f64 + 0.5) / k as f64;
            let (m, v) = oracle.moments(0, t);
            (m * m + v) * (1.0 + t)
        })
        .sum::<f64>()
        / k as f64;
    assert!((est - riemann).abs() < 3.0 * se, "estimate {est} vs {riemann} (se {se})");
}

/// Points `z = m_t + k sd_t`, `|k| <= 1`, around the mean and spread of the
/// treated-arm bridge at `t`; their mirror images sit at the same spots on
/// the control side.
fn central_bridge_grid(mu: f64) -> Vec<(f64, f64)> {
    let mut out = Vec::new();
    for t in linspace(0.1, 0.9, 5) {
        let sd = (t * t + (1.0 + mu * mu) * (1.0 - t) * (1.0 - t)).sqrt();
        for k in linspace(-1.0, 1.0, 5) {
            out.push((t * mu + k * sd, t));
        }
    }
    out
}

#[test]
fn ate_bridge_score_is_antisymmetric_on_central_grid() {
    let (ds, _) = generate(&DgpSpec::ate_default(), 10_000, &mut Rng::new(6)).unwrap();
    let model = fit_ate_bridge(&ds, &all_rows(&ds), &RunConfig::default(), 6).unwrap().model;
    let worst = central_bridge_grid(1.0)
        .into_iter()
        .map(|(z, t)| (model.eval(&[z], t) + model.eval(&[-z], -t)).abs())
        .fold(0.0, f64::max);
    assert!(worst < 0.1, "max |s(z, t) + s(-z, -t)| = {worst}");
}

#[test]
fn ate_bridge_integral_recovers_log_ratio() {
    let (ds, bundle) = generate(&DgpSpec::ate_default(), 10_000, &mut Rng::new(6)).unwrap();
    let cfg = RunConfig { x_degree: 5, time_degree: Some(6), mc_samples: 1_000_000, ..RunConfig::default() };
    let model = fit_ate_bridge(&ds, &all_rows(&ds), &cfg, 6).unwrap().model;
    let quad = Quadrature::truncated(cfg.quadrature_points, cfg.t_truncation).unwrap();
    let (mut fit, mut truth) = (Vec::new(), Vec::new());
    for z in linspace(-2.0, 2.0, 41) {
        let (l1, _, l0) = bundle.ate_log_densities(&[z]).unwrap();
        fit.push(integrate_time_score(model.as_ref(), &[z], 1.0, 0.0, &quad));
        truth.push(l0 - l1);
    }
    let err = rmse(&fit, &truth);
    assert!(err < 0.1, "log-ratio RMSE {err:.4}");
}

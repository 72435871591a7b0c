use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum LambdaKind {
    #[default]
    Constant,
    EndpointVanishing,
}

/// How linear score models are fitted.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Optimizer {
    /// One ridge-regularised solve over `mc_samples` draws.
    #[default]
    ClosedForm,
    /// `steps` minibatch Adam updates of size `batch_size`.
    Adam,
}

/// Run-wide settings. Every field has a default, so a config file only needs
/// the keys it overrides.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub seed: u64,
    pub batch_size: usize,
    pub steps: usize,
    pub learning_rate: f64,
    pub t_truncation: f64,
    pub quadrature_points: usize,
    pub folds: usize,
    pub lambda_kind: LambdaKind,
    pub sigma_min: f64,
    pub sigma_max: f64,
    /// Bridge samples drawn per closed-form fit.
    pub mc_samples: usize,
    pub ridge: f64,
    /// Time truncation used on the marginal-effect bridge, whose time score
    /// blows up near the endpoints. Only `|t| <= 1 - ame_t_truncation` is sampled.
    pub ame_t_truncation: f64,
    /// Bridge samples per closed-form fit on the marginal-effect bridge.
    pub ame_mc_samples: usize,
    /// Polynomial degree in `(d, z)` of the marginal-effect bridge score.
    pub ame_x_degree: usize,
    pub x_degree: usize,
    /// Time-basis degree; `None` picks the per-method default.
    pub time_degree: Option<usize>,
    /// Noise draws per row in denoising score matching.
    pub dsm_reps: usize,
    /// Weight of the path-wise control variate in the time-score risk.
    pub control_variate: f64,
    pub optimizer: Optimizer,
    /// Score-based representers clamp each coordinate into the
    /// `[q, 1 - q]` quantile range of the training rows.
    pub support_quantile: f64,
    /// Floor on estimated propensities of binary-treatment representers.
    pub propensity_trim: f64,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            seed: 0,
            batch_size: 512,
            steps: 2000,
            learning_rate: 1e-3,
            t_truncation: 0.01,
            quadrature_points: 129,
            folds: 5,
            lambda_kind: LambdaKind::Constant,
            sigma_min: 0.05,
            sigma_max: 0.5,
            mc_samples: 200_000,
            ridge: 1e-6,
            ame_t_truncation: 0.7,
            ame_mc_samples: 1_000_000,
            ame_x_degree: 2,
            x_degree: 3,
            time_degree: None,
            dsm_reps: 15,
            control_variate: 1.0,
            optimizer: Optimizer::ClosedForm,
            support_quantile: 0.005,
            propensity_trim: 0.01,
        }
    }
}

fn check(ok: bool, msg: impl Into<String>) -> Result<()> {
    if ok {
        Ok(())
    } else {
        Err(Error::Validation(msg.into()))
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        check(self.batch_size >= 1, "batch_size must be positive")?;
        check(self.steps >= 1, "steps must be positive")?;
        check(
            self.learning_rate > 0.0 && self.learning_rate.is_finite(),
            "learning_rate must be positive",
        )?;
        check(
            self.t_truncation > 0.0 && self.t_truncation < 0.5,
            "t_truncation must lie in (0, 0.5)",
        )?;
        check(
            self.ame_t_truncation > 0.0 && self.ame_t_truncation < 1.0,
            "ame_t_truncation must lie in (0, 1)",
        )?;
        check(self.ame_mc_samples >= 1, "ame_mc_samples must be positive")?;
        check(
            self.quadrature_points >= 3 && self.quadrature_points % 2 == 1,
            "quadrature_points must be odd and at least 3",
        )?;
        check(self.folds >= 2, "folds must be at least 2")?;
        check(
            self.sigma_min > 0.0 && self.sigma_min <= self.sigma_max && self.sigma_max.is_finite(),
            "need 0 < sigma_min <= sigma_max",
        )?;
        check(self.mc_samples >= 1, "mc_samples must be positive")?;
        check(self.ridge > 0.0 && self.ridge.is_finite(), "ridge must be positive")?;
        check(self.dsm_reps >= 1, "dsm_reps must be positive")?;
        check(
            (0.0..=1.0).contains(&self.control_variate),
            "control_variate must lie in [0, 1]",
        )?;
        check(
            (0.0..0.5).contains(&self.support_quantile),
            "support_quantile must lie in [0, 0.5)",
        )?;
        check(
            self.propensity_trim > 0.0 && self.propensity_trim < 0.5,
            "propensity_trim must lie in (0, 0.5)",
        )?;
        Ok(())
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text).map_err(|e| Error::Validation(format!("config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }
}

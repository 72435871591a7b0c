use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parse error at line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("validation error: {0}")]
    Validation(String),

    #[error("time {t} outside domain [{lo}, {hi}]")]
    Domain { t: f64, lo: f64, hi: f64 },

    #[error("degenerate law at t = {t}: variance {variance}")]
    DegenerateLaw { t: f64, variance: f64 },

    #[error("importance weight undefined: q({t}) = {density}")]
    ImportanceWeight { t: f64, density: f64 },

    #[error("non-finite loss or gradient at step {step}")]
    NonFinite { step: usize },

    #[error("singular system: {0}")]
    Singular(String),

    #[error("degenerate treatment arm: pi_hat = {0}")]
    DegenerateArm(f64),

    #[error("exponential overflow at log-ratio {0}")]
    Overflow(f64),

    #[error("unsupported oracle: {0}")]
    UnsupportedOracle(String),

    #[error("fold {fold} has {size} training rows, need at least {min}")]
    FoldTooSmall { fold: usize, size: usize, min: usize },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    /// Errors caused by bad input rather than a failed computation.
    pub fn is_validation(&self) -> bool {
        matches!(
            self,
            Error::Parse { .. } | Error::Validation(_) | Error::Domain { .. } | Error::FoldTooSmall { .. }
        )
    }
}

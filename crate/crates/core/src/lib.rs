//! Riesz representers from time-score matching over bridge distributions
//! and from denoising score matching, plugged into cross-fitted orthogonal
//! estimators of average treatment, marginal and policy effects.

pub mod bridges;
pub mod cli;
pub mod config;
pub mod data;
pub mod dml;
pub mod error;
pub mod features;
pub mod io;
pub mod losses;
pub mod par;
pub mod riesz;
pub mod rng;
pub mod score_model;
pub mod stats;
pub mod synth;
pub mod training;

pub use config::RunConfig;
pub use data::{Dataset, TreatmentKind};
pub use error::{Error, Result};
pub use rng::Rng;

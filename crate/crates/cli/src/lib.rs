//! Pipeline behind the `continuum` binary: synthetic data generation,
//! training, evaluation and standalone estimator runs.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod report;

pub use config::{EvalOptions, RunConfig};
pub use error::CliError;

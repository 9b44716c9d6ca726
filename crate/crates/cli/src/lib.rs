//! Library half of the `slr-bench` command: configuration loading and the
//! `synth`, `train`, `crossval` and `eval` commands.

pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, Result};

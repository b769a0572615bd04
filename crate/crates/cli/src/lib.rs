//! Experiment driver: configuration, artifact files and pipeline stages.

pub mod artifacts;
pub mod commands;
pub mod config;
pub mod error;

pub use config::ExperimentConfig;
pub use error::{CliError, ErrorKind};

//! Experiment harness for the pdhams samplers: TOML configs in, CSV and JSON artifacts out.

pub mod config;
pub mod error;
pub mod experiment;
pub mod io;

pub use config::ExperimentConfig;
pub use error::{exit_code, ConfigError, Warning};

//! Configuration and mode dispatch for the `mmfe` experiment runner.

pub mod config;
pub mod error;
pub mod run;

pub use config::{ExperimentConfig, Mode};
pub use error::CliError;
pub use run::run;

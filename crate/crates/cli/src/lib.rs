//! Config-driven experiment runner for `kdvlab`.

pub mod config;
pub mod runner;

pub use config::{ConfigError, ExperimentConfig, Mode};
pub use runner::{run, Manifest, RunError, MANIFEST};

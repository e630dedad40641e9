//! Command-line harness: instance generation, chain building, benchmark
//! runs, ranking evaluation, report merging and output verification.
//!
//! Everything is driven by a single JSON configuration document (see
//! [`config::ExperimentConfig`]); a config fully determines every output
//! byte, including under parallel execution.

pub mod commands;
pub mod config;
pub mod data;
pub mod error;

pub use config::{Arm, ExperimentConfig, InstanceSpec};
pub use error::{CliError, CliResult};

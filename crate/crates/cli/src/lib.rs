//! Experiment harness around `adpqis-core`: configuration, replications,
//! sweeps and CSV reports.

pub mod commands;
pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod report;

pub use config::{ExperimentSpec, Overrides};
pub use error::{CliError, CliResult};

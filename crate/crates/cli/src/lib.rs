//! Experiment runner for the `nepv` command: config parsing, parallel sweeps,
//! CSV output and the benchmark-table presets.

// `!(x > 0.0)` is used on purpose so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiment;
pub mod output;
pub mod presets;

pub use config::{ExperimentKind, ExperimentSpec};
pub use error::CliError;
pub use experiment::{run_experiment, ResultRow};
pub use presets::Preset;

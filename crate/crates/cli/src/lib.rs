//! Command-line front end: experiment configuration, drivers, manifests and plots.

// `!(x > 0.0)` rejects NaN as well.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod experiments;
pub mod manifest;
pub mod plots;

pub use config::{ExperimentConfig, ExperimentId};
pub use error::{CliError, CliResult};
pub use experiments::{output_root, run, RunOptions, RunOutcome};
pub use manifest::Manifest;

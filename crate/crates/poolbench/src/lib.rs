//! Experiment front end for `poolbench-core`: configuration files, seeded
//! method sweeps on a worker pool, finite-difference gradient checks,
//! learning-rate sweeps and CSV/JSON reports.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod error;
pub mod gradcheck;
pub mod lr_sweep;
pub mod params_report;
pub mod report;
pub mod sweep;

pub use config::ExperimentConfig;
pub use error::{CliError, ExitCode};

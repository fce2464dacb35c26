//! Experiment runner for `relaysec-core`: configuration, SNR sweeps with
//! analytic and simulated columns, CSV output and a validation suite.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod experiment;
pub mod validate;

pub use config::{load_config, parse_config, ConfigError, ExperimentSpec};
pub use experiment::{
    run_experiment, run_experiment_with, write_csv, ExperimentError, Mode, ResultRow,
};

//! Library surface of the experiment runner, exposed so integration tests
//! can drive experiments in-process.

pub mod config;
pub mod experiments;
pub mod gridsearch;
pub mod report;
pub mod svg;

pub use config::{load_config, parse_config, CliError, ExperimentConfig, ExperimentKind};
pub use experiments::{run_experiment, RunOutputs};
pub use gridsearch::{grid_search_stepsize, GridSearchOutcome, Objective};

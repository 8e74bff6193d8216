//! Experiment runner and property suites.

mod config;
mod experiment;
pub mod stats;
mod verify;

pub use config::{ExperimentConfig, ScheduleFamily};
pub use experiment::{run_experiment, trial_seed, Check, ExperimentOutput, RateReport, RateRow, TrialRow};
pub use verify::{
    grid_argmin_2d, roster, run_suite, test_geometries, verify_invariants, SuiteReport, VerifyOptions, VerifyReport, SUITES,
};

//! Monte Carlo harness: configuration, trial runner, figure datasets.

mod config;
mod figures;
pub mod output;
mod run;

pub use config::{ExperimentConfig, Scheme};
pub use figures::*;
pub use run::{
    assign_scheme, best_rinh, gain_matrix, realization, rinh_curve, run_experiment, run_trial, trial_seed,
    window_sum_se, Dataset, MeanCi, ResultRow, Summary,
};

//! Experiment orchestration: configuration, seeded trials, learning curves,
//! CSV output and evaluation.

mod config;
mod curve;
mod eval;
mod run;

pub use config::ExperimentConfig;
pub use curve::{
    aggregate_curves, format_float, read_trial_curve, write_aggregate, CurvePoint, LearningCurve, TrialCurve,
    AGGREGATE_HEADER, TRIAL_HEADER,
};
pub use eval::{evaluate_policy, random_policy_baseline, EvalResult};
pub use run::{aggregate_directory, iteration_log_path, run_experiment, run_trial, trial_curve_path, ExperimentResult, TrialResult};

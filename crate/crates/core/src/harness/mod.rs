//! Experiment configuration, batch runs and result files.

pub mod config;
pub mod runner;

pub use config::{ConditionKind, ConditionsSpec, ExperimentConfig, Mode, QLearningSpec, StrategySpec};
pub use runner::{
    evaluate_conditions, lock_in_aggregates, output_dir, run_cell, run_experiment, sweep_summary, ConditionInputs,
    DeltaAggregate, ExperimentSummary, RunConditions, RunSummary, SweepSummary, VerifyCell, OUT_DIR_ENV,
};

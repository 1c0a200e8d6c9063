//! Tabular Q-learning on augmented states, its learning-rate machinery and
//! the closed forms that describe its greedy phase.

pub mod schedule;
pub mod sim;
pub mod table;
pub mod theory;

pub use schedule::{alpha_delta_limit, alpha_delta_limit_capped, appendix_alpha_schedule, AlphaLimit, AlphaRule, BetaRule, LearningSchedule};
pub use sim::{greedy_action, q_update, run_q_learning, softmax_probs, Phase, RunConfig, RunOutput, RunTrace, StepRecord};
pub use table::QTables;
pub use theory::{
    check_grim, check_ladder_conditions, check_lock_in, check_naive, check_qfixed_identity, induced_strategy,
    limit_q_closed_form, lock_in_trajectory, ConditionReport, InducedStrategy, QFixedReport,
};

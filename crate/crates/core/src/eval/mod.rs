//! Benchmark harness: scenario files, success and scene-graph predicates,
//! PF/TCR/SGH scoring, suite runs and Table-style reports.

mod predicate;
mod report;
mod run;
mod scenario;

use thiserror::Error;

pub use predicate::Predicate;
pub use report::{format_percent, render_table, SummaryRow, SuiteReport};
pub use run::{
    build_session, dry_run, run_scenario, run_suite, run_trial, score_session, trial_seed, Backend, SuiteOptions,
    TrialReport,
};
pub use scenario::Scenario;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum EvalError {
    #[error("scenario: {0}")]
    ScenarioParse(String),
    #[error("io: {0}")]
    Io(String),
    #[error(transparent)]
    Session(#[from] crate::orchestrator::OrchestratorError),
}

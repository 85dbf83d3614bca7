//! Cognitive layer: planning prompts, the plan text format, the rule
//! checker and built-in symbolic planners.

mod hanoi;
mod plan;
mod prompt;
mod solvers;
mod validate;

use thiserror::Error;

pub use hanoi::{hanoi_moves, solve_hanoi, solve_hanoi_setup, HanoiMove, HanoiSetup, MAX_DISCS};
pub use plan::{parse_plan, ArgValue, Placeholder, Plan, PlanParseError, PlanStep};
pub use prompt::{build_planning_request, planning_rules};
pub use solvers::{
    food_category, size_rank, solve_between, solve_hanoi_request, solve_isolated, solve_odd_one_out, solve_organize,
    solve_recipe, solve_request, solve_sorting, solve_stacking,
};
pub use validate::{error_rules, has_errors, validate_plan, validate_plan_for, RuleId, RuleViolation, Severity};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum PlannerError {
    #[error("invalid configuration: {0}")]
    InvalidConfiguration(String),
    #[error("infeasible goal: {0}")]
    InfeasibleGoal(String),
    #[error(transparent)]
    Parse(#[from] PlanParseError),
}

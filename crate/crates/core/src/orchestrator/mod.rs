//! Interaction layer: tool execution, the session state machine with its
//! confirmation gate and failure handling, traces, replay and the HTTP
//! service.

mod exec;
mod replay;
pub mod service;
mod session;
mod trace;

use thiserror::Error;

pub use exec::{tool_seconds, ExecOutcome, Executor, FailureKind};
pub use replay::{replay, ReplayReport};
pub use session::{Intervention, Interaction, Session, SessionConfig, SessionState, Suggestion};
pub use trace::{lint, parse_ndjson, to_ndjson, EventKind, TraceEvent};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum OrchestratorError {
    #[error("cannot {action} in state {state}")]
    InvalidTransition { action: String, state: String },
    #[error("invalid intervention: {0}")]
    InvalidIntervention(String),
    #[error("session {0} not found")]
    SessionNotFound(String),
    #[error("port {0} is already in use")]
    PortInUse(u16),
    #[error("replay: {0}")]
    Replay(String),
    #[error("session setup: {0}")]
    Setup(String),
    #[error("io: {0}")]
    Io(String),
}

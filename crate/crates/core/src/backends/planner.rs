use super::remote::{chat_request_body, parse_chat_reply, post_json, HttpConfig};
use super::{BackendError, ChatMessage};
use crate::planner::{build_planning_request, parse_plan, solve_request};
use crate::scene_graph::SceneGraph;
use crate::tools::ToolMode;
use serde::{Deserialize, Serialize};

/// Produces plan text for a request against the current graph. The caller
/// parses and validates the text.
pub trait PlannerBackend: Send {
    fn plan(&mut self, request: &str, graph: &SceneGraph, mode: ToolMode) -> Result<String, BackendError>;
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "solver", rename_all = "snake_case")]
pub enum PlannerSpec {
    /// Pick a built-in solver from the wording of the request.
    #[default]
    Auto,
    /// Always answer with this plan text.
    Fixed { plan: String },
}

#[derive(Debug, Clone, Default)]
pub struct ScriptedPlanner {
    pub spec: PlannerSpec,
}

impl ScriptedPlanner {
    pub fn new(spec: PlannerSpec) -> Self {
        Self { spec }
    }
}

impl PlannerBackend for ScriptedPlanner {
    fn plan(&mut self, request: &str, graph: &SceneGraph, _mode: ToolMode) -> Result<String, BackendError> {
        match &self.spec {
            PlannerSpec::Auto => solve_request(graph, request)
                .map(|p| p.render())
                .map_err(|e| BackendError::Planning(e.to_string())),
            PlannerSpec::Fixed { plan } => Ok(plan.clone()),
        }
    }
}

/// Planner behind a chat-completion endpoint. A reply that does not parse
/// as a plan, or has no steps, is re-requested once with the error.
#[derive(Debug, Clone)]
pub struct RemotePlanner {
    pub http: HttpConfig,
}

impl RemotePlanner {
    pub fn new(http: HttpConfig) -> Self {
        Self { http }
    }

    fn ask(&self, history: &[ChatMessage]) -> Result<String, BackendError> {
        let body = chat_request_body(&self.http, history, &[]);
        let reply = post_json(&self.http, &body)?;
        Ok(parse_chat_reply(&reply)?.content)
    }
}

const PLANNER_SYSTEM: &str = "You write robot task plans as numbered tool calls.";

impl PlannerBackend for RemotePlanner {
    fn plan(&mut self, request: &str, graph: &SceneGraph, mode: ToolMode) -> Result<String, BackendError> {
        let mut history =
            vec![ChatMessage::system(PLANNER_SYSTEM), ChatMessage::user(build_planning_request(request, graph, mode))];
        let check = |text: &str| match parse_plan(text) {
            Ok(p) if p.steps.is_empty() => Err("the reply contains no numbered steps".to_string()),
            Ok(_) => Ok(()),
            Err(e) => Err(e.to_string()),
        };
        let first = self.ask(&history)?;
        let Err(problem) = check(&first) else {
            return Ok(first);
        };
        history.push(ChatMessage::assistant(first, vec![]));
        history.push(ChatMessage::user(format!(
            "That plan could not be read ({problem}). Reply again with numbered steps only, one tool call per line."
        )));
        let second = self.ask(&history)?;
        check(&second).map_err(|p| BackendError::MalformedResponse(format!("planner reply still unreadable: {p}")))?;
        Ok(second)
    }
}

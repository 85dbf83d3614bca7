//! Model roles: the interaction chat model, the planner and the vision
//! model. Each has a deterministic scripted implementation and a remote
//! HTTP adapter speaking the common chat-completion JSON shape.

mod edt;
mod planner;
mod remote;
mod scripted_chat;
mod scripted_vlm;
pub mod wire;

use crate::sim::{CaptureResult, WorldState};
use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

pub use edt::distance_transform;
pub use planner::{PlannerBackend, PlannerSpec, RemotePlanner, ScriptedPlanner};
pub use remote::{HttpConfig, RemoteChat, RemoteVlm};
pub use scripted_chat::{is_affirmative, step_of_call, ScriptedChat, CONFIRM_WORDS, PLAN_CALL_ID};
pub use scripted_vlm::{ScriptedVlm, VlmNoise};

#[derive(Debug, Error, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "error", content = "detail")]
pub enum BackendError {
    #[error("backend unavailable: {0}")]
    BackendUnavailable(String),
    #[error("authentication rejected: {0}")]
    AuthError(String),
    #[error("malformed response: {0}")]
    MalformedResponse(String),
    #[error("malformed tool call: {0}")]
    MalformedToolCall(String),
    #[error("unsupported prompt: {0}")]
    UnsupportedPrompt(String),
    #[error("parse error: {0}")]
    ParseError(String),
    #[error("no box returned for '{0}'")]
    MissingLabel(String),
    #[error("planning failed: {0}")]
    Planning(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Role {
    System,
    User,
    Assistant,
    Tool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolCall {
    pub id: String,
    pub name: String,
    pub arguments: serde_json::Map<String, Value>,
}

impl ToolCall {
    pub fn new(id: impl Into<String>, name: impl Into<String>, arguments: serde_json::Map<String, Value>) -> Self {
        Self { id: id.into(), name: name.into(), arguments }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ToolResult {
    pub call_id: String,
    pub ok: bool,
    pub payload: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failure_reason: Option<String>,
}

impl ToolResult {
    pub fn success(call_id: &str, payload: Value) -> Self {
        Self { call_id: call_id.to_string(), ok: true, payload, failure_reason: None }
    }

    pub fn failure(call_id: &str, reason: impl Into<String>) -> Self {
        Self { call_id: call_id.to_string(), ok: false, payload: Value::Null, failure_reason: Some(reason.into()) }
    }

    /// Text handed back to the chat model.
    pub fn to_message_content(&self) -> String {
        match (&self.failure_reason, self.ok) {
            (_, true) => serde_json::json!({"status": "success", "result": self.payload}).to_string(),
            (reason, false) => serde_json::json!({"status": "failure", "reason": reason}).to_string(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ChatMessage {
    pub role: Role,
    #[serde(default)]
    pub content: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub tool_calls: Vec<ToolCall>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tool_result_for: Option<String>,
}

impl ChatMessage {
    pub fn system(content: impl Into<String>) -> Self {
        Self { role: Role::System, content: content.into(), tool_calls: vec![], tool_result_for: None }
    }

    pub fn user(content: impl Into<String>) -> Self {
        Self { role: Role::User, content: content.into(), tool_calls: vec![], tool_result_for: None }
    }

    pub fn assistant(content: impl Into<String>, tool_calls: Vec<ToolCall>) -> Self {
        Self { role: Role::Assistant, content: content.into(), tool_calls, tool_result_for: None }
    }

    pub fn tool(result: &ToolResult) -> Self {
        Self {
            role: Role::Tool,
            content: result.to_message_content(),
            tool_calls: vec![],
            tool_result_for: Some(result.call_id.clone()),
        }
    }
}

/// Interaction model: picks the next assistant turn from the history.
pub trait ChatBackend: Send {
    fn complete(&mut self, history: &[ChatMessage], tools: &[Value]) -> Result<ChatMessage, BackendError>;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VlmKind {
    Presence,
    Bboxes,
    Point,
    Vqa,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VlmQuery {
    pub kind: VlmKind,
    /// Object name, comma-separated names, point prompt or question.
    pub payload: String,
    /// Capture the question is about.
    pub image_ref: u64,
}

impl VlmQuery {
    pub fn new(kind: VlmKind, payload: impl Into<String>, image_ref: u64) -> Self {
        Self { kind, payload: payload.into(), image_ref }
    }

    pub fn names(&self) -> Vec<&str> {
        self.payload.split(',').map(str::trim).filter(|s| !s.is_empty()).collect()
    }

    /// Prompt text as sent to a remote model.
    pub fn prompt(&self) -> String {
        match self.kind {
            VlmKind::Presence => format!("Is there a {} in this image? Reply with the single digit 1 for yes or 0 for no.", self.payload),
            VlmKind::Bboxes => format!(
                "Give the bounding box of each of these objects: {}. Reply only with a JSON list of {{\"bbox_2d\": [x1, y1, x2, y2], \"label\": \"name\"}} objects.",
                self.payload
            ),
            VlmKind::Point => format!(
                "Point to the {}. Reply with exactly one point as <points x y>label</points>.",
                self.payload
            ),
            VlmKind::Vqa => self.payload.clone(),
        }
    }

    pub fn system_prompt(&self) -> &'static str {
        match self.kind {
            VlmKind::Presence => "Reply with 1 or 0 and nothing else.",
            VlmKind::Bboxes => "Reply with the JSON list only.",
            VlmKind::Point => "Reply with a single <points x y>label</points> element.",
            VlmKind::Vqa => "Answer briefly.",
        }
    }
}

/// Vision model. Replies are raw wire text; callers parse them with
/// [`wire`].
pub trait VlmBackend: Send {
    fn query(&mut self, q: &VlmQuery, world: &WorldState, capture: &CaptureResult) -> Result<String, BackendError>;
}

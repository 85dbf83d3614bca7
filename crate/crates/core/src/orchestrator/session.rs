use super::exec::{tool_seconds, ExecOutcome, Executor, FailureKind};
use super::trace::{EventKind, TraceEvent};
use super::OrchestratorError;
use crate::backends::{step_of_call, BackendError, ChatBackend, ChatMessage, ToolCall, ToolResult};
use crate::planner::Plan;
use crate::scene_graph::SceneGraph;
use crate::sim::WorldState;
use crate::tools::{self, ToolMode};
use serde::{Deserialize, Serialize};
use serde_json::{json, Map, Value};
use std::collections::BTreeMap;
use std::fmt;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "state", content = "step")]
pub enum SessionState {
    AwaitRequest,
    Planning,
    AwaitConfirmation,
    /// 1-based plan step most recently started (0 before the first).
    Executing(usize),
    AwaitUserIntervention,
    Done,
    Failed,
}

impl SessionState {
    pub fn name(&self) -> &'static str {
        match self {
            SessionState::AwaitRequest => "AwaitRequest",
            SessionState::Planning => "Planning",
            SessionState::AwaitConfirmation => "AwaitConfirmation",
            SessionState::Executing(_) => "Executing",
            SessionState::AwaitUserIntervention => "AwaitUserIntervention",
            SessionState::Done => "Done",
            SessionState::Failed => "Failed",
        }
    }

    pub fn is_terminal(&self) -> bool {
        matches!(self, SessionState::Done | SessionState::Failed)
    }
}

impl fmt::Display for SessionState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            SessionState::Executing(k) => write!(f, "Executing({k})"),
            other => f.write_str(other.name()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Interaction {
    /// Confirmation and interventions are answered automatically.
    #[default]
    Batch,
    /// A person answers through [`Session::confirm`] and
    /// [`Session::intervene`].
    Interactive,
}

/// Operator answer to a suggestion.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "choice", rename_all = "snake_case")]
pub enum Intervention {
    Skip,
    /// Move the object (the failed call's subject unless named) onto the
    /// table at `xy`, then retry.
    Reposition {
        #[serde(default)]
        object: Option<String>,
        xy: [f64; 2],
    },
    Abort,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SessionConfig {
    pub mode: ToolMode,
    pub interaction: Interaction,
    pub max_retries: u32,
    /// Batch-mode answer to a suggestion.
    pub auto_response: Intervention,
    /// Hard cap on assistant turns.
    pub max_turns: usize,
}

impl Default for SessionConfig {
    fn default() -> Self {
        Self {
            mode: ToolMode::Vlm,
            interaction: Interaction::Batch,
            max_retries: 3,
            auto_response: Intervention::Abort,
            max_turns: 400,
        }
    }
}

const SYSTEM_PROMPT: &str = "You control a single-arm tabletop robot through the listed tools.\n\
- Pass every new user request to plan_using_advanced_llm first, show the plan and ask the user to confirm it.\n\
- After confirmation follow the plan step by step; placeholders like $step2.out refer to the result of step 2.\n\
- Issue at most one pick_object or place_object per turn and read its result before the next movement.\n\
- Never use a perception tool while holding an object.\n\
- Keep the scene graph current: whatever moved must be edited, and whatever will be picked must have fresh coordinates.\n\
- Stop and report if a tool fails and you cannot recover.";

const CHAT_SECONDS: f64 = 1.0;

/// Pending operator decision after repeated failures.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Suggestion {
    pub step: usize,
    pub call_id: String,
    pub object: Option<String>,
    pub options: Vec<String>,
    pub reason: String,
}

type Sink = Box<dyn FnMut(&TraceEvent) + Send>;

/// One interaction session: chat history, executor, state machine and the
/// append-only trace.
pub struct Session {
    pub id: String,
    state: SessionState,
    pub config: SessionConfig,
    pub exec: Executor,
    chat: Box<dyn ChatBackend>,
    history: Vec<ChatMessage>,
    trace: Vec<TraceEvent>,
    clock: f64,
    turns: usize,
    confirmed: bool,
    unresolved_failure: bool,
    retry_counts: BTreeMap<usize, u32>,
    suggestion: Option<Suggestion>,
    excluded: bool,
    end_reason: Option<String>,
    sink: Option<Sink>,
}

impl Session {
    /// `meta` is copied into the session_start event (scenario id, seed,
    /// trial, ...).
    pub fn new(id: impl Into<String>, config: SessionConfig, exec: Executor, chat: Box<dyn ChatBackend>, meta: Value) -> Self {
        let mut s = Self {
            id: id.into(),
            state: SessionState::AwaitRequest,
            config,
            exec,
            chat,
            history: vec![ChatMessage::system(SYSTEM_PROMPT)],
            trace: Vec::new(),
            clock: 0.0,
            turns: 0,
            confirmed: false,
            unresolved_failure: false,
            retry_counts: BTreeMap::new(),
            suggestion: None,
            excluded: false,
            end_reason: None,
            sink: None,
        };
        let payload = json!({
            "session": s.id,
            "meta": meta,
            "config": s.config,
            "perception": s.exec.perception,
            "graph": s.exec.graph.to_json(),
            "world": s.exec.world,
        });
        s.emit(EventKind::SessionStart, payload);
        s
    }

    /// Receives every event as it is appended (already-recorded events are
    /// not re-sent).
    pub fn set_sink(&mut self, sink: Sink) {
        self.sink = Some(sink);
    }

    pub fn state(&self) -> SessionState {
        self.state
    }

    pub fn trace(&self) -> &[TraceEvent] {
        &self.trace
    }

    pub fn history(&self) -> &[ChatMessage] {
        &self.history
    }

    pub fn graph(&self) -> &SceneGraph {
        &self.exec.graph
    }

    pub fn world(&self) -> &WorldState {
        &self.exec.world
    }

    pub fn plan(&self) -> Option<&Plan> {
        self.exec.plan.as_ref()
    }

    pub fn suggestion(&self) -> Option<&Suggestion> {
        self.suggestion.as_ref()
    }

    pub fn retry_counts(&self) -> &BTreeMap<usize, u32> {
        &self.retry_counts
    }

    /// The trial hit an unavailable model endpoint and must not be scored.
    pub fn excluded(&self) -> bool {
        self.excluded
    }

    pub fn end_reason(&self) -> Option<&str> {
        self.end_reason.as_deref()
    }

    pub fn snapshot(&self) -> Value {
        json!({
            "id": self.id,
            "state": self.state.name(),
            "step": match self.state { SessionState::Executing(k) => Some(k), _ => None },
            "plan": self.exec.plan.as_ref().map(Plan::render),
            "suggestion": self.suggestion,
            "excluded": self.excluded,
            "end_reason": self.end_reason,
            "events": self.trace.len(),
        })
    }

    fn emit(&mut self, kind: EventKind, payload: Value) {
        let e = TraceEvent { seq: self.trace.len() as u64, t: (self.clock * 1000.0).round() / 1000.0, kind, payload };
        if let Some(sink) = self.sink.as_mut() {
            sink(&e);
        }
        self.trace.push(e);
    }

    fn set_state(&mut self, next: SessionState) {
        if next != self.state {
            let from = self.state.to_string();
            self.state = next;
            self.emit(EventKind::StateChange, json!({"from": from, "to": next.to_string()}));
        }
    }

    fn finish(&mut self, state: SessionState, reason: impl Into<String>) {
        let reason = reason.into();
        self.end_reason = Some(reason.clone());
        self.set_state(state);
        let payload = json!({
            "state": state.name(),
            "reason": reason,
            "excluded": self.excluded,
            "graph": self.exec.graph.to_json(),
            "world": self.exec.world,
        });
        self.emit(EventKind::SessionEnd, payload);
    }

    fn invalid(&self, action: &str) -> OrchestratorError {
        OrchestratorError::InvalidTransition { action: action.to_string(), state: self.state.to_string() }
    }

    fn push_user(&mut self, text: &str) {
        self.emit(EventKind::UserMsg, json!({"text": text}));
        self.history.push(ChatMessage::user(text));
    }

    pub fn submit_request(&mut self, text: &str) -> Result<(), OrchestratorError> {
        if self.state != SessionState::AwaitRequest {
            return Err(self.invalid("submit_request"));
        }
        self.push_user(text);
        self.set_state(SessionState::Planning);
        self.drive();
        Ok(())
    }

    pub fn confirm(&mut self) -> Result<(), OrchestratorError> {
        if self.state != SessionState::AwaitConfirmation {
            return Err(self.invalid("confirm"));
        }
        self.accept(false);
        self.drive();
        Ok(())
    }

    fn accept(&mut self, auto: bool) {
        self.emit(EventKind::Confirmation, json!({"accepted": true, "auto": auto}));
        self.confirmed = true;
        self.push_user("Yes, go ahead.");
        self.set_state(SessionState::Executing(0));
    }

    pub fn decline(&mut self) -> Result<(), OrchestratorError> {
        if self.state != SessionState::AwaitConfirmation {
            return Err(self.invalid("decline"));
        }
        self.emit(EventKind::Confirmation, json!({"accepted": false, "auto": false}));
        self.push_user("No, do not execute this plan.");
        if let Some(reply) = self.chat_turn() {
            for c in &reply.tool_calls {
                let r = ToolResult::failure(&c.id, "Rejected: the plan was declined");
                self.record_unexecuted(c, &r, "report");
            }
        }
        if !self.state.is_terminal() {
            self.finish(SessionState::Failed, "plan declined by the user");
        }
        Ok(())
    }

    pub fn intervene(&mut self, choice: Intervention) -> Result<(), OrchestratorError> {
        if self.state != SessionState::AwaitUserIntervention {
            return Err(self.invalid("intervene"));
        }
        self.apply_intervention(choice, false)?;
        self.drive();
        Ok(())
    }

    /// Runs a whole request in batch fashion: submit, auto-confirm and
    /// execute until the session ends or waits for a person.
    pub fn run_request(&mut self, text: &str) -> Result<SessionState, OrchestratorError> {
        self.submit_request(text)?;
        Ok(self.state)
    }

    fn apply_intervention(&mut self, choice: Intervention, auto: bool) -> Result<(), OrchestratorError> {
        let s = self.suggestion.clone().ok_or_else(|| self.invalid("intervene"))?;
        match &choice {
            Intervention::Reposition { object, xy } => {
                let object = object.clone().or_else(|| s.object.clone()).ok_or_else(|| {
                    OrchestratorError::InvalidIntervention("no object to reposition".into())
                })?;
                self.exec
                    .world
                    .reposition(&object, *xy)
                    .map_err(|e| OrchestratorError::InvalidIntervention(e.to_string()))?;
                self.emit(EventKind::Intervention, json!({"choice": "reposition", "object": object, "xy": xy, "auto": auto}));
                self.suggestion = None;
                self.retry_counts.remove(&s.step);
                self.set_state(SessionState::Executing(s.step));
                self.push_user(&format!("I moved {object} to a new spot. Please retry step {}.", s.step));
            }
            Intervention::Skip => {
                self.emit(EventKind::Intervention, json!({"choice": "skip", "step": s.step, "auto": auto}));
                self.suggestion = None;
                self.unresolved_failure = false;
                self.set_state(SessionState::Executing(s.step));
                self.push_user(&format!("Skip step {} and continue.", s.step));
            }
            Intervention::Abort => {
                self.emit(EventKind::Intervention, json!({"choice": "abort", "step": s.step, "auto": auto}));
                self.suggestion = None;
                self.finish(SessionState::Failed, format!("aborted after step {} failed: {}", s.step, s.reason));
            }
        }
        Ok(())
    }

    fn chat_turn(&mut self) -> Option<ChatMessage> {
        self.turns += 1;
        let defs: Vec<Value> = tools::registry(self.config.mode).iter().map(|t| t.to_function_json()).collect();
        match self.chat.complete(&self.history, &defs) {
            Ok(msg) => {
                self.clock += CHAT_SECONDS;
                let calls: Vec<Value> =
                    msg.tool_calls.iter().map(|c| json!({"id": c.id, "name": c.name, "arguments": c.arguments})).collect();
                self.emit(EventKind::AssistantMsg, json!({"text": msg.content, "tool_calls": calls}));
                self.history.push(msg.clone());
                Some(msg)
            }
            Err(e) => {
                self.backend_down(&e);
                None
            }
        }
    }

    fn backend_down(&mut self, e: &BackendError) {
        self.excluded = matches!(e, BackendError::BackendUnavailable(_) | BackendError::AuthError(_));
        self.finish(SessionState::Failed, e.to_string());
    }

    fn drive(&mut self) {
        loop {
            match self.state {
                SessionState::Planning | SessionState::Executing(_) => {}
                _ => return,
            }
            if self.turns >= self.config.max_turns {
                self.finish(SessionState::Failed, "turn limit reached");
                return;
            }
            let Some(msg) = self.chat_turn() else { return };
            if msg.tool_calls.is_empty() {
                self.on_text_reply();
            } else {
                self.run_calls(&msg.tool_calls);
            }
        }
    }

    fn on_text_reply(&mut self) {
        match self.state {
            SessionState::Planning if self.exec.plan.is_some() && !self.unresolved_failure => {
                self.set_state(SessionState::AwaitConfirmation);
                if self.config.interaction == Interaction::Batch {
                    self.accept(true);
                }
            }
            SessionState::Planning => self.finish(SessionState::Failed, "no plan was produced"),
            SessionState::Executing(_) if !self.unresolved_failure => self.finish(SessionState::Done, "all steps completed"),
            SessionState::Executing(_) => self.finish(SessionState::Failed, "stopped after a failed step"),
            _ => {}
        }
    }

    fn record_unexecuted(&mut self, call: &ToolCall, result: &ToolResult, action: &str) {
        self.emit(EventKind::ToolCall, json!({"id": call.id, "name": call.name, "arguments": call.arguments}));
        self.emit_result(call, result);
        self.emit(
            EventKind::FailureDecision,
            json!({"call_id": call.id, "action": action, "reason": result.failure_reason}),
        );
        self.history.push(ChatMessage::tool(result));
    }

    fn emit_result(&mut self, call: &ToolCall, r: &ToolResult) {
        self.emit(
            EventKind::ToolResult,
            json!({"id": r.call_id, "name": call.name, "ok": r.ok, "payload": r.payload, "reason": r.failure_reason}),
        );
    }

    /// Executes one call and records call, side events and result.
    fn run_one(&mut self, call: &ToolCall) -> ExecOutcome {
        let (outcome, resolved) = self.exec.execute(call);
        self.emit(
            EventKind::ToolCall,
            json!({"id": call.id, "name": call.name, "arguments": call.arguments, "resolved": resolved}),
        );
        for (kind, payload) in self.exec.drain_events() {
            self.emit(kind, payload);
        }
        self.clock += tool_seconds(&call.name);
        self.emit_result(call, &outcome.result);
        outcome
    }

    fn run_calls(&mut self, calls: &[ToolCall]) {
        let mut blocked: Option<String> = None;
        let mut motions = 0;
        for call in calls {
            if self.state.is_terminal() {
                return;
            }
            if let Some(why) = &blocked {
                let r = ToolResult::failure(&call.id, format!("Skipped: {why}"));
                self.record_unexecuted(call, &r, "report");
                continue;
            }
            if tools::is_motion(&call.name) {
                motions += 1;
                let refusal = if !self.confirmed {
                    Some("Rejected: the plan has not been confirmed")
                } else if motions > 1 {
                    Some("Rejected: only one movement per turn")
                } else {
                    None
                };
                if let Some(why) = refusal {
                    let r = ToolResult::failure(&call.id, why);
                    self.record_unexecuted(call, &r, "report");
                    self.unresolved_failure = true;
                    blocked = Some("an earlier call in this turn failed".into());
                    continue;
                }
            }
            let step = step_of_call(&call.id);
            if let (SessionState::Executing(_), Some(k)) = (self.state, step) {
                self.set_state(SessionState::Executing(k));
            }
            let first = self.run_one(call);
            let result = self.handle_failure(step.unwrap_or(0), call, first);
            if self.state.is_terminal() {
                return;
            }
            self.history.push(ChatMessage::tool(&ToolResult { call_id: call.id.clone(), ..result.clone() }));
            match (&result.ok, self.suggestion.is_some()) {
                (true, _) => self.unresolved_failure = false,
                (false, true) => {
                    self.unresolved_failure = true;
                    blocked = Some("waiting for the operator".into());
                }
                (false, false) if call.name == tools::VQA => {}
                (false, false) => {
                    self.unresolved_failure = true;
                    blocked = Some("an earlier call in this turn failed".into());
                }
            }
        }
        if let Some(s) = self.suggestion.clone() {
            self.emit(EventKind::Suggestion, serde_json::to_value(&s).expect("suggestion serializes"));
            self.set_state(SessionState::AwaitUserIntervention);
            if self.config.interaction == Interaction::Batch {
                let auto = self.config.auto_response.clone();
                if let Err(e) = self.apply_intervention(auto, true) {
                    self.finish(SessionState::Failed, format!("automatic intervention failed: {e}"));
                }
            }
        }
    }

    fn decide(&mut self, call_id: &str, action: &str, extra: Value) {
        let mut payload = json!({"call_id": call_id, "action": action});
        if let (Value::Object(p), Value::Object(x)) = (&mut payload, extra) {
            p.extend(x);
        }
        self.emit(EventKind::FailureDecision, payload);
    }

    /// Retry policy. Returns the final result of the call.
    fn handle_failure(&mut self, step: usize, call: &ToolCall, first: ExecOutcome) -> ToolResult {
        let mut out = first;
        let mut last_id = call.id.clone();
        loop {
            let Some(kind) = out.failure else { return out.result };
            let reason = out.result.failure_reason.clone().unwrap_or_default();
            let count = {
                let c = self.retry_counts.entry(step).or_default();
                *c += 1;
                *c
            };
            match kind {
                FailureKind::Unavailable => {
                    self.decide(&last_id, "abort", json!({"reason": reason}));
                    self.excluded = true;
                    self.finish(SessionState::Failed, reason);
                    return out.result;
                }
                FailureKind::Informational => {
                    self.decide(&last_id, "continue", json!({"reason": reason}));
                    return out.result;
                }
                FailureKind::Fatal => {
                    self.decide(&last_id, "report", json!({"reason": reason}));
                    return out.result;
                }
                FailureKind::NotVisible => {
                    self.decide(&last_id, "suggest", json!({"reason": reason, "options": ["reposition", "skip"]}));
                    self.suggest(step, call, out.subject.clone(), vec!["reposition", "skip"], reason);
                    return out.result;
                }
                _ if count >= self.config.max_retries => {
                    self.decide(&last_id, "suggest", json!({"reason": reason, "attempts": count, "options": ["skip", "reposition"]}));
                    self.suggest(step, call, out.subject.clone(), vec!["skip", "reposition"], reason);
                    return out.result;
                }
                _ => {
                    let rescan = out.subject.clone().filter(|_| call.name == tools::PICK);
                    self.decide(&last_id, "retry", json!({"reason": reason, "attempt": count, "rescan": rescan}));
                    if let Some(subject) = rescan {
                        self.rescan(step, count, &subject);
                    }
                    let retry = ToolCall::new(format!("step{step}.retry{count}"), call.name.clone(), call.arguments.clone());
                    last_id = retry.id.clone();
                    out = self.run_one(&retry);
                    let subject = out.subject.clone();
                    out.subject = subject.or_else(|| call.arguments.get("object_name").and_then(Value::as_str).map(str::to_string));
                }
            }
        }
    }

    fn suggest(&mut self, step: usize, call: &ToolCall, subject: Option<String>, options: Vec<&str>, reason: String) {
        let object = subject.or_else(|| call.arguments.get("object_name").and_then(Value::as_str).map(str::to_string));
        self.suggestion = Some(Suggestion {
            step,
            call_id: call.id.clone(),
            object,
            options: options.into_iter().map(str::to_string).collect(),
            reason,
        });
    }

    /// Refreshes `subject`'s coordinates before a retried pick.
    fn rescan(&mut self, step: usize, n: u32, subject: &str) {
        let id = format!("step{step}.rescan{n}");
        let outcome = if self.config.mode == ToolMode::Apriltag {
            let read = ToolCall::new(id.clone(), tools::APRILTAGS, Map::from_iter([("trigger".to_string(), json!(true))]));
            let out = self.run_one(&read);
            match self.exec.tag_coordinates(subject, &out.result.payload).filter(|_| out.result.ok) {
                Some(xyz) => {
                    let args = Map::from_iter([
                        ("node_name".to_string(), json!(subject)),
                        ("attribute_name".to_string(), json!("coordinates")),
                        ("value".to_string(), xyz),
                    ]);
                    self.run_one(&ToolCall::new(format!("{id}.edit"), tools::EDIT, args))
                }
                None => out,
            }
        } else {
            let args = Map::from_iter([("targets_to_scan".to_string(), json!([subject]))]);
            self.run_one(&ToolCall::new(id.clone(), tools::SCAN, args))
        };
        if !outcome.result.ok {
            self.decide(&outcome.result.call_id, "continue", json!({"reason": outcome.result.failure_reason}));
        }
    }
}

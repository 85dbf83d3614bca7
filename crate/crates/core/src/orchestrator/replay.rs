use super::exec::Executor;
use super::trace::{EventKind, TraceEvent};
use super::OrchestratorError;
use crate::backends::{BackendError, PlannerBackend, ToolCall, VlmBackend, VlmQuery};
use crate::geometry::PerceptionConfig;
use crate::scene_graph::SceneGraph;
use crate::sim::{CaptureResult, WorldState};
use crate::tools::ToolMode;
use serde_json::Value;
use std::collections::VecDeque;

/// Vision replies in recorded order.
struct RecordedVlm(VecDeque<Result<String, BackendError>>);

impl VlmBackend for RecordedVlm {
    fn query(&mut self, q: &VlmQuery, _world: &WorldState, _capture: &CaptureResult) -> Result<String, BackendError> {
        self.0
            .pop_front()
            .unwrap_or_else(|| Err(BackendError::MalformedResponse(format!("trace has no reply for {:?} query", q.kind))))
    }
}

/// Planner outputs in recorded order.
struct RecordedPlanner(VecDeque<Result<String, BackendError>>);

impl PlannerBackend for RecordedPlanner {
    fn plan(&mut self, _request: &str, _graph: &SceneGraph, _mode: ToolMode) -> Result<String, BackendError> {
        self.0.pop_front().unwrap_or_else(|| Err(BackendError::Planning("trace has no recorded plan".into())))
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayReport {
    pub calls: usize,
    pub graph_matches: bool,
    pub world_matches: bool,
    /// Calls whose success flag differed from the recording.
    pub diverged: Vec<String>,
    pub final_graph: SceneGraph,
    pub final_world: WorldState,
}

impl ReplayReport {
    pub fn ok(&self) -> bool {
        self.graph_matches && self.world_matches && self.diverged.is_empty()
    }
}

fn bad(msg: impl Into<String>) -> OrchestratorError {
    OrchestratorError::Replay(msg.into())
}

/// Re-executes every recorded tool call and operator reposition against
/// the recorded initial state, feeding back the recorded model replies,
/// and compares the outcome with the recorded final state.
pub fn replay(events: &[TraceEvent]) -> Result<ReplayReport, OrchestratorError> {
    let start = events.first().filter(|e| e.kind == EventKind::SessionStart).ok_or_else(|| bad("trace does not begin with session_start"))?;
    let end = events.iter().rev().find(|e| e.kind == EventKind::SessionEnd).ok_or_else(|| bad("trace has no session_end"))?;
    let graph = SceneGraph::from_json(&start.payload["graph"]).map_err(|e| bad(format!("initial graph: {e}")))?;
    let world: WorldState =
        serde_json::from_value(start.payload["world"].clone()).map_err(|e| bad(format!("initial world: {e}")))?;
    let mode: ToolMode = serde_json::from_value(start.payload["config"]["mode"].clone()).unwrap_or_default();
    let perception: PerceptionConfig = serde_json::from_value(start.payload["perception"].clone()).unwrap_or_default();

    let replies = events
        .iter()
        .filter(|e| e.kind == EventKind::VlmQuery)
        .map(|e| match e.payload.get("reply").and_then(Value::as_str) {
            Some(r) => Ok(r.to_string()),
            None => Err(serde_json::from_value(e.payload["error"].clone())
                .unwrap_or_else(|_| BackendError::MalformedResponse("unrecorded error".into()))),
        })
        .collect();
    let plans = events
        .iter()
        .filter(|e| e.kind == EventKind::ToolResult && e.payload["name"] == crate::tools::PLAN)
        .map(|e| match e.payload["payload"].get("plan").and_then(Value::as_str) {
            Some(p) => Ok(p.to_string()),
            None => Err(BackendError::Planning(e.payload["reason"].as_str().unwrap_or_default().to_string())),
        })
        .collect();

    let mut exec = Executor::new(world, graph, mode, Box::new(RecordedVlm(replies)), Box::new(RecordedPlanner(plans)));
    exec.perception = perception;
    let mut calls = 0;
    let mut diverged = Vec::new();
    for (i, e) in events.iter().enumerate() {
        match e.kind {
            EventKind::ToolCall => {
                let id = e.payload["id"].as_str().unwrap_or_default();
                let name = e.payload["name"].as_str().unwrap_or_default();
                let recorded = events[i + 1..]
                    .iter()
                    .find(|r| r.kind == EventKind::ToolResult && r.payload["id"] == id)
                    .ok_or_else(|| bad(format!("call {id} has no result")))?;
                // Calls the session refused never reached the executor.
                let Some(args) = e.payload.get("resolved").and_then(Value::as_object) else {
                    continue;
                };
                calls += 1;
                let out = exec.execute_resolved(&ToolCall::new(id, name, args.clone()));
                if Value::Bool(out.result.ok) != recorded.payload["ok"] {
                    diverged.push(id.to_string());
                }
            }
            EventKind::Intervention if e.payload["choice"] == "reposition" => {
                let object = e.payload["object"].as_str().unwrap_or_default();
                let xy: [f64; 2] =
                    serde_json::from_value(e.payload["xy"].clone()).map_err(|_| bad("reposition without xy"))?;
                exec.world.reposition(object, xy).map_err(|err| bad(format!("reposition: {err}")))?;
            }
            _ => {}
        }
    }
    let graph_matches = exec.graph.to_json() == end.payload["graph"];
    let world_matches = serde_json::to_value(&exec.world).map_err(|e| bad(e.to_string()))? == end.payload["world"];
    Ok(ReplayReport { calls, graph_matches, world_matches, diverged, final_graph: exec.graph, final_world: exec.world })
}

use crate::tools;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::{BTreeMap, BTreeSet};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum EventKind {
    SessionStart,
    UserMsg,
    AssistantMsg,
    ToolCall,
    ToolResult,
    StateChange,
    GraphDelta,
    VlmQuery,
    FailureDecision,
    Suggestion,
    Intervention,
    Confirmation,
    SessionEnd,
}

/// One trace line. `t` is simulated seconds since the session started.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceEvent {
    pub seq: u64,
    pub t: f64,
    pub kind: EventKind,
    pub payload: Value,
}

pub fn to_ndjson(events: &[TraceEvent]) -> String {
    let mut out = String::new();
    for e in events {
        out.push_str(&serde_json::to_string(e).expect("events serialize"));
        out.push('\n');
    }
    out
}

pub fn parse_ndjson(text: &str) -> Result<Vec<TraceEvent>, String> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| serde_json::from_str(l).map_err(|e| format!("trace line {}: {e}", i + 1)))
        .collect()
}

/// Checks the structural guarantees every trace must meet; returns one
/// message per problem.
///
/// - sequence numbers count up from 0 and time never decreases;
/// - every tool call has exactly one result, and results follow their call;
/// - every failed result is followed by a failure decision for it;
/// - no two motion calls without a result in between;
/// - no perception call while an object is held;
/// - the first motion call comes after an accepted confirmation;
/// - boxes are only requested for objects whose latest presence answer
///   was `1`.
pub fn lint(events: &[TraceEvent]) -> Vec<String> {
    let mut problems = Vec::new();
    let mut open: BTreeMap<String, String> = BTreeMap::new();
    let mut answered: BTreeSet<String> = BTreeSet::new();
    let mut awaiting_decision: BTreeSet<String> = BTreeSet::new();
    let mut motion_in_flight = false;
    let mut holding = false;
    let mut confirmed = false;
    let mut present: BTreeMap<String, bool> = BTreeMap::new();
    let mut last_t = 0.0;
    for (i, e) in events.iter().enumerate() {
        if e.seq != i as u64 {
            problems.push(format!("event {i} has seq {}", e.seq));
        }
        if e.t < last_t {
            problems.push(format!("event {i} goes back in time"));
        }
        last_t = e.t;
        let id = e.payload.get("id").and_then(Value::as_str).unwrap_or_default().to_string();
        match e.kind {
            EventKind::Confirmation => confirmed |= e.payload.get("accepted") == Some(&Value::Bool(true)),
            EventKind::ToolCall => {
                let name = e.payload.get("name").and_then(Value::as_str).unwrap_or_default().to_string();
                if tools::is_motion(&name) {
                    if !confirmed {
                        problems.push(format!("event {i}: motion call {id} before confirmation"));
                    }
                    if motion_in_flight {
                        problems.push(format!("event {i}: motion call {id} while another motion awaits its result"));
                    }
                    motion_in_flight = true;
                }
                if holding && tools::is_perception(&name) {
                    problems.push(format!("event {i}: perception call {id} while holding an object"));
                }
                if open.insert(id.clone(), name).is_some() || answered.contains(&id) {
                    problems.push(format!("event {i}: duplicate call id {id}"));
                }
            }
            EventKind::ToolResult => {
                let Some(name) = open.remove(&id) else {
                    problems.push(format!("event {i}: result for unknown or answered call {id}"));
                    continue;
                };
                answered.insert(id.clone());
                let ok = e.payload.get("ok") == Some(&Value::Bool(true));
                if tools::is_motion(&name) {
                    motion_in_flight = false;
                    if ok {
                        holding = name == tools::PICK;
                    }
                }
                if !ok {
                    awaiting_decision.insert(id);
                }
            }
            EventKind::FailureDecision => {
                let call = e.payload.get("call_id").and_then(Value::as_str).unwrap_or_default();
                awaiting_decision.remove(call);
            }
            EventKind::VlmQuery => {
                let text = |k: &str| e.payload.get(k).and_then(Value::as_str).unwrap_or_default();
                match text("kind") {
                    "presence" => {
                        present.insert(text("payload").trim().to_string(), text("reply").trim() == "1");
                    }
                    "bboxes" => {
                        for name in text("payload").split(',').map(str::trim).filter(|n| !n.is_empty()) {
                            if present.get(name) != Some(&true) {
                                problems.push(format!("event {i}: boxes requested for {name} without a positive presence check"));
                            }
                        }
                    }
                    _ => {}
                }
            }
            _ => {}
        }
    }
    for id in open.keys() {
        problems.push(format!("call {id} has no result"));
    }
    for id in awaiting_decision {
        problems.push(format!("failed call {id} has no failure decision"));
    }
    problems
}

use super::{BackendError, ChatBackend, ChatMessage, Role, ToolCall};
use crate::planner::{parse_plan, Plan};
use crate::tools;
use regex::Regex;
use serde_json::{Map, Value};
use std::collections::{BTreeMap, BTreeSet};

/// User replies accepted as plan confirmation.
pub const CONFIRM_WORDS: [&str; 12] =
    ["yes", "y", "ok", "okay", "sure", "go", "go ahead", "proceed", "confirm", "confirmed", "do it", "execute"];

/// Id of the planner call; plan steps use `step{k}` and reissued steps
/// `step{k}.attempt{n}`.
pub const PLAN_CALL_ID: &str = "plan";

pub fn is_affirmative(text: &str) -> bool {
    let norm: String = text
        .to_lowercase()
        .chars()
        .map(|c| if c.is_alphanumeric() || c == ' ' { c } else { ' ' })
        .collect();
    let norm = norm.split_whitespace().collect::<Vec<_>>().join(" ");
    CONFIRM_WORDS.iter().any(|w| norm == *w || norm.starts_with(&format!("{w} ")))
}

/// Step number encoded in a call id.
pub fn step_of_call(id: &str) -> Option<usize> {
    let rest = id.strip_prefix("step")?;
    let digits: String = rest.chars().take_while(char::is_ascii_digit).collect();
    let tail = &rest[digits.len()..];
    let suffix_ok = tail.is_empty() || tail.starts_with(".retry") || tail.starts_with(".attempt");
    if suffix_ok { digits.parse().ok() } else { None }
}

/// Deterministic interaction model that follows the operating procedure
/// literally: plan first, ask for confirmation, then walk the plan, never
/// more than one movement per turn, stopping on failures it cannot
/// explain away. The reply is a pure function of the history.
#[derive(Debug, Clone, Copy, Default)]
pub struct ScriptedChat;

fn result_status(m: &ChatMessage) -> (bool, Value) {
    let v: Value = serde_json::from_str(&m.content).unwrap_or(Value::Null);
    let ok = v.get("status").and_then(Value::as_str) == Some("success");
    let body = if ok { v.get("result").cloned() } else { v.get("reason").cloned() };
    (ok, body.unwrap_or(Value::Null))
}

impl ScriptedChat {
    fn request_plan(request: &str) -> ChatMessage {
        let mut args = Map::new();
        args.insert("request_from_user".into(), Value::String(request.to_string()));
        ChatMessage::assistant(
            "I'll ask the planner for a step-by-step plan.",
            vec![ToolCall::new(PLAN_CALL_ID, tools::PLAN, args)],
        )
    }

    fn execute(plan: &Plan, after_confirm: &[ChatMessage]) -> ChatMessage {
        let n = plan.steps.len();
        let skip_re = Regex::new(r"(?i)\bskip (?:step )?(\d+)").expect("static regex");
        let retry_re = Regex::new(r"(?i)\bretry (?:step )?(\d+)").expect("static regex");
        let tool_of: BTreeMap<&str, &str> = after_confirm
            .iter()
            .flat_map(|m| m.tool_calls.iter())
            .map(|c| (c.id.as_str(), c.name.as_str()))
            .collect();
        let mut done = BTreeSet::new();
        let mut attempts: BTreeMap<usize, usize> = BTreeMap::new();
        // Earliest unresolved failure: (step, reason, index in history).
        let mut pending: Option<(usize, String, usize)> = None;
        for (i, m) in after_confirm.iter().enumerate() {
            match m.role {
                Role::Assistant => {
                    for c in &m.tool_calls {
                        if let Some(k) = step_of_call(&c.id) {
                            *attempts.entry(k).or_default() += 1;
                        }
                    }
                }
                Role::Tool => {
                    let Some(id) = m.tool_result_for.as_deref() else { continue };
                    let Some(k) = step_of_call(id) else { continue };
                    let (ok, body) = result_status(m);
                    let informational = tool_of.get(id) == Some(&tools::VQA);
                    if ok || informational {
                        done.insert(k);
                        if pending.as_ref().is_some_and(|p| p.0 == k) {
                            pending = None;
                        }
                    } else if !done.contains(&k) && pending.is_none() {
                        let reason = body.as_str().map_or_else(|| body.to_string(), str::to_string);
                        pending = Some((k, reason, i));
                    }
                }
                Role::User => {
                    for c in skip_re.captures_iter(&m.content) {
                        let k: usize = c[1].parse().unwrap_or(0);
                        done.insert(k);
                        if pending.as_ref().is_some_and(|p| p.0 == k) {
                            pending = None;
                        }
                    }
                }
                Role::System => {}
            }
        }
        if let Some((k, reason, at)) = pending {
            let retry = after_confirm[at + 1..]
                .iter()
                .filter(|m| m.role == Role::User)
                .any(|m| retry_re.captures_iter(&m.content).any(|c| c[1].parse() == Ok(k)));
            if !retry || k == 0 || k > n {
                return ChatMessage::assistant(format!("Step {k} failed: {reason}. Stopping here."), vec![]);
            }
            let id = format!("step{k}.attempt{}", attempts.get(&k).copied().unwrap_or(1));
            let step = &plan.steps[k - 1];
            return ChatMessage::assistant(
                format!("Retrying step {k}."),
                vec![ToolCall::new(id, step.tool.clone(), step.args_json())],
            );
        }
        let Some(first) = (1..=n).find(|k| !done.contains(k)) else {
            return ChatMessage::assistant(format!("All {n} steps are complete."), vec![]);
        };
        let mut calls = Vec::new();
        let mut motions = 0;
        for k in first..=n {
            if done.contains(&k) {
                continue;
            }
            let step = &plan.steps[k - 1];
            let alone = tools::is_perception(&step.tool) || step.tool == tools::PLAN;
            if alone && !calls.is_empty() {
                break;
            }
            if tools::is_motion(&step.tool) {
                if motions == 1 {
                    break;
                }
                motions += 1;
            }
            let id = match attempts.get(&k) {
                Some(a) => format!("step{k}.attempt{a}"),
                None => format!("step{k}"),
            };
            calls.push(ToolCall::new(id, step.tool.clone(), step.args_json()));
            if alone {
                break;
            }
        }
        let last = first + calls.len() - 1;
        let text = if calls.len() == 1 { format!("Executing step {first}.") } else { format!("Executing steps {first}-{last}.") };
        ChatMessage::assistant(text, calls)
    }
}

impl ChatBackend for ScriptedChat {
    fn complete(&mut self, history: &[ChatMessage], _tools: &[Value]) -> Result<ChatMessage, BackendError> {
        let request = history
            .iter()
            .find(|m| m.role == Role::User)
            .ok_or_else(|| BackendError::MalformedResponse("history has no user request".into()))?;
        let Some(plan_at) = history.iter().rposition(|m| m.tool_result_for.as_deref() == Some(PLAN_CALL_ID)) else {
            return Ok(Self::request_plan(&request.content));
        };
        let (ok, body) = result_status(&history[plan_at]);
        if !ok {
            return Ok(ChatMessage::assistant(format!("The planner could not produce a plan: {body}. Stopping."), vec![]));
        }
        let text = body.get("plan").and_then(Value::as_str).unwrap_or_default();
        let plan = match parse_plan(text) {
            Ok(p) if !p.steps.is_empty() => p,
            Ok(_) => return Ok(ChatMessage::assistant("The planner returned no steps. Stopping.", vec![])),
            Err(e) => return Ok(ChatMessage::assistant(format!("The plan could not be read ({e}). Stopping."), vec![])),
        };
        let rest = &history[plan_at + 1..];
        let Some(reply_at) = rest.iter().position(|m| m.role == Role::User) else {
            return Ok(ChatMessage::assistant(
                format!("Here is the plan:\n{}Shall I execute it?", plan.render()),
                vec![],
            ));
        };
        if !is_affirmative(&rest[reply_at].content) {
            return Ok(ChatMessage::assistant("Understood, nothing will be executed.", vec![]));
        }
        Ok(Self::execute(&plan, &rest[reply_at + 1..]))
    }
}

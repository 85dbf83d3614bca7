use super::{BackendError, ChatBackend, ChatMessage, Role, ToolCall, VlmBackend, VlmQuery};
use crate::sim::{rgb_png, CaptureResult, WorldState};
use base64::Engine as _;
use serde_json::{json, Value};
use std::time::Duration;

/// Endpoint settings for a chat-completion style HTTP service.
#[derive(Debug, Clone, PartialEq)]
pub struct HttpConfig {
    pub url: String,
    pub api_key: Option<String>,
    pub model: Option<String>,
    pub timeout: Duration,
    pub attempts: u32,
    /// Delay before the second attempt; doubles after each failure.
    pub backoff: Duration,
}

impl HttpConfig {
    pub fn new(url: impl Into<String>) -> Self {
        Self {
            url: url.into(),
            api_key: None,
            model: None,
            timeout: Duration::from_secs(60),
            attempts: 3,
            backoff: Duration::from_millis(500),
        }
    }

    /// Reads `LTA_<ROLE>_URL`, `LTA_<ROLE>_KEY` and `LTA_<ROLE>_MODEL`.
    pub fn from_env(role: &str) -> Result<Self, BackendError> {
        let var = |suffix: &str| std::env::var(format!("LTA_{}_{suffix}", role.to_uppercase())).ok();
        let url = var("URL")
            .ok_or_else(|| BackendError::BackendUnavailable(format!("LTA_{}_URL is not set", role.to_uppercase())))?;
        let mut cfg = Self::new(url);
        cfg.api_key = var("KEY");
        cfg.model = var("MODEL");
        Ok(cfg)
    }
}

/// POSTs `body` with retries. Auth failures and unreadable bodies are not
/// retried.
pub(crate) fn post_json(cfg: &HttpConfig, body: &Value) -> Result<Value, BackendError> {
    let agent = ureq::Agent::new_with_config(ureq::Agent::config_builder().timeout_global(Some(cfg.timeout)).build());
    let mut last = String::new();
    let mut delay = cfg.backoff;
    for attempt in 0..cfg.attempts.max(1) {
        if attempt > 0 && !delay.is_zero() {
            std::thread::sleep(delay);
            delay *= 2;
        }
        let mut req = agent.post(&cfg.url);
        if let Some(key) = &cfg.api_key {
            req = req.header("Authorization", &format!("Bearer {key}"));
        }
        match req.send_json(body) {
            Ok(mut resp) => {
                return resp
                    .body_mut()
                    .read_json::<Value>()
                    .map_err(|e| BackendError::MalformedResponse(format!("response body is not JSON: {e}")));
            }
            Err(ureq::Error::StatusCode(code @ (401 | 403))) => {
                return Err(BackendError::AuthError(format!("HTTP {code} from {}", cfg.url)));
            }
            Err(ureq::Error::StatusCode(code)) if code >= 500 || code == 429 => last = format!("HTTP {code}"),
            Err(ureq::Error::StatusCode(code)) => {
                return Err(BackendError::MalformedResponse(format!("request rejected with HTTP {code}")));
            }
            Err(e) => last = e.to_string(),
        }
    }
    Err(BackendError::BackendUnavailable(format!("{} after {} attempts: {last}", cfg.url, cfg.attempts.max(1))))
}

fn message_json(m: &ChatMessage) -> Value {
    match m.role {
        Role::System => json!({"role": "system", "content": m.content}),
        Role::User => json!({"role": "user", "content": m.content}),
        Role::Tool => json!({"role": "tool", "tool_call_id": m.tool_result_for, "content": m.content}),
        Role::Assistant if m.tool_calls.is_empty() => json!({"role": "assistant", "content": m.content}),
        Role::Assistant => {
            let calls: Vec<Value> = m
                .tool_calls
                .iter()
                .map(|c| {
                    json!({
                        "id": c.id,
                        "type": "function",
                        "function": {"name": c.name, "arguments": Value::Object(c.arguments.clone()).to_string()},
                    })
                })
                .collect();
            json!({"role": "assistant", "content": m.content, "tool_calls": calls})
        }
    }
}

pub(crate) fn chat_request_body(cfg: &HttpConfig, history: &[ChatMessage], tools: &[Value]) -> Value {
    let mut body = json!({"messages": history.iter().map(message_json).collect::<Vec<_>>()});
    if let Some(model) = &cfg.model {
        body["model"] = json!(model);
    }
    if !tools.is_empty() {
        body["tools"] = json!(tools);
    }
    body
}

pub(crate) fn parse_chat_reply(reply: &Value) -> Result<ChatMessage, BackendError> {
    let msg = reply
        .pointer("/choices/0/message")
        .ok_or_else(|| BackendError::MalformedResponse("no choices[0].message in reply".into()))?;
    let content = msg.get("content").and_then(Value::as_str).unwrap_or_default().to_string();
    let mut calls = Vec::new();
    for (i, c) in msg.get("tool_calls").and_then(Value::as_array).into_iter().flatten().enumerate() {
        let name = c
            .pointer("/function/name")
            .and_then(Value::as_str)
            .ok_or_else(|| BackendError::MalformedToolCall(format!("tool call {i} has no function name")))?;
        let id = c.get("id").and_then(Value::as_str).map_or_else(|| format!("call{i}"), str::to_string);
        let arguments = match c.pointer("/function/arguments") {
            Some(Value::String(s)) if s.trim().is_empty() => serde_json::Map::new(),
            Some(Value::String(s)) => match serde_json::from_str::<Value>(s) {
                Ok(Value::Object(m)) => m,
                _ => return Err(BackendError::MalformedToolCall(format!("arguments of {name} are not a JSON object"))),
            },
            Some(Value::Object(m)) => m.clone(),
            None => serde_json::Map::new(),
            Some(_) => return Err(BackendError::MalformedToolCall(format!("arguments of {name} are not a JSON object"))),
        };
        calls.push(ToolCall::new(id, name, arguments));
    }
    Ok(ChatMessage::assistant(content, calls))
}

#[derive(Debug, Clone)]
pub struct RemoteChat {
    pub http: HttpConfig,
}

impl RemoteChat {
    pub fn new(http: HttpConfig) -> Self {
        Self { http }
    }
}

impl ChatBackend for RemoteChat {
    fn complete(&mut self, history: &[ChatMessage], tools: &[Value]) -> Result<ChatMessage, BackendError> {
        let reply = post_json(&self.http, &chat_request_body(&self.http, history, tools))?;
        parse_chat_reply(&reply)
    }
}

/// Vision model behind a chat-completion endpoint; the capture goes along
/// as a PNG data URL.
#[derive(Debug, Clone)]
pub struct RemoteVlm {
    pub http: HttpConfig,
}

impl RemoteVlm {
    pub fn new(http: HttpConfig) -> Self {
        Self { http }
    }
}

impl VlmBackend for RemoteVlm {
    fn query(&mut self, q: &VlmQuery, world: &WorldState, capture: &CaptureResult) -> Result<String, BackendError> {
        let png = base64::engine::general_purpose::STANDARD.encode(rgb_png(world, capture));
        let mut body = json!({
            "messages": [
                {"role": "system", "content": q.system_prompt()},
                {"role": "user", "content": [
                    {"type": "text", "text": q.prompt()},
                    {"type": "image_url", "image_url": {"url": format!("data:image/png;base64,{png}")}},
                ]},
            ],
        });
        if let Some(model) = &self.http.model {
            body["model"] = json!(model);
        }
        let reply = post_json(&self.http, &body)?;
        reply
            .pointer("/choices/0/message/content")
            .and_then(Value::as_str)
            .map(str::to_string)
            .ok_or_else(|| BackendError::MalformedResponse("no text content in vision reply".into()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reply_with_tool_call() {
        let reply = json!({"choices": [{"message": {"role": "assistant", "content": null, "tool_calls": [
            {"id": "c1", "type": "function", "function": {"name": "pick_object", "arguments": "{\"object_name\": \"apple\"}"}}
        ]}}]});
        let m = parse_chat_reply(&reply).unwrap();
        assert_eq!(m.tool_calls[0].name, "pick_object");
        assert_eq!(m.tool_calls[0].arguments["object_name"], "apple");
        let bad = json!({"choices": [{"message": {"tool_calls": [{"function": {"name": "x", "arguments": "[1"}}]}}]});
        assert!(matches!(parse_chat_reply(&bad), Err(BackendError::MalformedToolCall(_))));
        assert!(matches!(parse_chat_reply(&json!({})), Err(BackendError::MalformedResponse(_))));
    }

    #[test]
    fn history_round_trips_tool_calls() {
        let mut args = serde_json::Map::new();
        args.insert("object_name".into(), json!("apple"));
        let m = ChatMessage::assistant("", vec![ToolCall::new("c1", "pick_object", args)]);
        let wire = json!({"choices": [{"message": message_json(&m)}]});
        assert_eq!(parse_chat_reply(&wire).unwrap(), m);
    }
}

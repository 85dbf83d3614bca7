mod common;

use lta::eval::{build_session, Backend, Scenario};
use lta::orchestrator::{parse_ndjson, service, EventKind, Interaction};
use lta::scene_graph::SceneGraph;
use lta::sim::FaultSpec;
use lta::tools;
use serde_json::{json, Value};
use std::io::{BufRead, BufReader};
use std::sync::Arc;
use std::time::Duration;

struct Server {
    base: String,
    agent: ureq::Agent,
}

impl Server {
    fn start(sc: Scenario) -> Self {
        let sc = Arc::new(sc);
        let factory: service::SessionFactory = Arc::new(move |_| {
            build_session(&sc, 0, sc.seed, Backend::Scripted, Interaction::Interactive).map_err(|e| e.to_string())
        });
        let (tx, rx) = std::sync::mpsc::channel();
        std::thread::spawn(move || {
            let rt = tokio::runtime::Runtime::new().unwrap();
            rt.block_on(async {
                let listener = tokio::net::TcpListener::bind("127.0.0.1:0").await.unwrap();
                tx.send(listener.local_addr().unwrap()).unwrap();
                service::serve(listener, factory).await.unwrap();
            });
        });
        let addr = rx.recv().unwrap();
        let agent = ureq::Agent::config_builder()
            .http_status_as_error(false)
            .timeout_global(Some(Duration::from_secs(120)))
            .build()
            .into();
        Self { base: format!("http://{addr}"), agent }
    }

    fn get(&self, path: &str) -> (u16, String) {
        let mut r = self.agent.get(format!("{}{path}", self.base)).call().unwrap();
        (r.status().as_u16(), r.body_mut().read_to_string().unwrap())
    }

    fn post(&self, path: &str, body: Option<Value>) -> (u16, Value) {
        let req = self.agent.post(format!("{}{path}", self.base));
        let mut r = match body {
            Some(b) => req.send_json(&b).unwrap(),
            None => req.send_empty().unwrap(),
        };
        let status = r.status().as_u16();
        let text = r.body_mut().read_to_string().unwrap();
        (status, serde_json::from_str(&text).unwrap_or(Value::String(text)))
    }

    fn create(&self) -> String {
        let (code, v) = self.post("/sessions", None);
        assert_eq!(code, 200);
        v["id"].as_str().unwrap().to_string()
    }
}

fn state_changes(trace: &str) -> Vec<String> {
    parse_ndjson(trace)
        .unwrap()
        .into_iter()
        .filter(|e| e.kind == EventKind::StateChange)
        .map(|e| e.payload["to"].as_str().unwrap().to_string())
        .collect()
}

#[test]
fn message_plans_then_waits_for_confirmation() {
    let sc = common::scenario("iii_a.json");
    let request = sc.request.clone();
    let srv = Server::start(sc);
    let id = srv.create();
    let (code, snap) = srv.post(&format!("/sessions/{id}/messages"), Some(json!({"text": request})));
    assert_eq!(code, 200);
    assert_eq!(snap["state"], "AwaitConfirmation");
    assert!(snap["plan"].as_str().unwrap().contains(tools::PICK));

    let (code, trace) = srv.get(&format!("/sessions/{id}/trace"));
    assert_eq!(code, 200);
    let states = state_changes(&trace);
    let planning = states.iter().position(|s| s == "Planning").expect("Planning state");
    let waiting = states.iter().position(|s| s == "AwaitConfirmation").expect("AwaitConfirmation state");
    assert!(planning < waiting);
    // Nothing has moved yet.
    assert!(!parse_ndjson(&trace).unwrap().iter().any(|e| e.kind == EventKind::ToolCall && tools::is_motion(e.payload["name"].as_str().unwrap_or(""))));

    let (code, snap) = srv.post(&format!("/sessions/{id}/confirm"), None);
    assert_eq!(code, 200);
    assert_eq!(snap["state"], "Done", "{snap}");

    // A finished session admits no confirmation.
    let (code, _) = srv.post(&format!("/sessions/{id}/confirm"), None);
    assert_eq!(code, 409);

    let (code, graph) = srv.get(&format!("/sessions/{id}/graph"));
    assert_eq!(code, 200);
    let g = SceneGraph::deserialize(&graph).unwrap();
    let mut large = g.get("large_box").unwrap().contains.clone();
    large.sort();
    assert_eq!(large, ["apple", "lemon", "orange"]);

    let (code, world) = srv.get(&format!("/sessions/{id}/world"));
    assert_eq!(code, 200);
    assert!(serde_json::from_str::<Value>(&world).unwrap()["objects"]["apple"].is_object());
}

#[test]
fn unknown_sessions_are_not_found() {
    let srv = Server::start(common::scenario("i_a.json"));
    assert_eq!(srv.get("/sessions/nope").0, 404);
    assert_eq!(srv.get("/sessions/nope/graph").0, 404);
    assert_eq!(srv.get("/sessions/nope/events").0, 404);
    assert_eq!(srv.post("/sessions/nope/confirm", None).0, 404);
    assert_eq!(srv.post("/sessions/nope/messages", Some(json!({"text": "hi"}))).0, 404);
}

#[test]
fn confirming_before_a_plan_exists_conflicts() {
    let srv = Server::start(common::scenario("i_a.json"));
    let id = srv.create();
    assert_eq!(srv.get(&format!("/sessions/{id}")).0, 200);
    assert_eq!(srv.post(&format!("/sessions/{id}/confirm"), None).0, 409);
    assert_eq!(srv.post(&format!("/sessions/{id}/intervention"), Some(json!({"choice": "skip"}))).0, 409);
}

#[test]
fn declining_moves_nothing() {
    let sc = common::scenario("i_c.json");
    let request = sc.request.clone();
    let srv = Server::start(sc);
    let id = srv.create();
    srv.post(&format!("/sessions/{id}/messages"), Some(json!({"text": request})));
    let (code, snap) = srv.post(&format!("/sessions/{id}/decline"), None);
    assert_eq!(code, 200);
    assert_eq!(snap["state"], "Failed", "{snap}");
    let (_, trace) = srv.get(&format!("/sessions/{id}/trace"));
    let events = parse_ndjson(&trace).unwrap();
    let motions = events
        .iter()
        .filter(|e| e.kind == EventKind::ToolCall && tools::is_motion(e.payload["name"].as_str().unwrap_or("")))
        .count();
    assert_eq!(motions, 0);
    assert!(events.iter().any(|e| e.kind == EventKind::Confirmation && e.payload["accepted"] == false));
}

#[test]
fn operator_reposition_resumes_execution() {
    let mut sc = common::scenario("iii_a.json");
    sc.faults = vec![FaultSpec::GraspSlip { count: 3, object: Some("apple".into()) }];
    let request = sc.request.clone();
    let srv = Server::start(sc);
    let id = srv.create();
    srv.post(&format!("/sessions/{id}/messages"), Some(json!({"text": request})));
    let (_, snap) = srv.post(&format!("/sessions/{id}/confirm"), None);
    assert_eq!(snap["state"], "AwaitUserIntervention", "{snap}");
    assert_eq!(snap["suggestion"]["object"], "apple");

    // Malformed choices are rejected without changing state.
    let (code, _) = srv.post(&format!("/sessions/{id}/intervention"), Some(json!({"choice": "dance"})));
    assert!(code == 400 || code == 422, "{code}");

    let (code, snap) =
        srv.post(&format!("/sessions/{id}/intervention"), Some(json!({"choice": "reposition", "xy": [0.0, -0.4]})));
    assert_eq!(code, 200);
    assert_eq!(snap["state"], "Done", "{snap}");
    let (_, world) = srv.get(&format!("/sessions/{id}/world"));
    let world: Value = serde_json::from_str(&world).unwrap();
    assert!(world["objects"]["apple"].is_object());
}

/// Reads SSE messages as (event, data) pairs until `done` says stop.
fn read_sse(reader: &mut impl BufRead, mut done: impl FnMut(&str, &Value) -> bool) -> Vec<(String, Value)> {
    let mut out = Vec::new();
    let (mut name, mut data) = (String::new(), String::new());
    let mut line = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).unwrap() == 0 {
            return out;
        }
        let l = line.trim_end_matches(['\r', '\n']);
        if let Some(v) = l.strip_prefix("event:") {
            name = v.trim().to_string();
        } else if let Some(v) = l.strip_prefix("data:") {
            data.push_str(v.trim_start());
        } else if l.is_empty() && !data.is_empty() {
            let v: Value = serde_json::from_str(&data).unwrap();
            let stop = done(&name, &v);
            out.push((std::mem::take(&mut name), v));
            data.clear();
            if stop {
                return out;
            }
        }
    }
}

#[test]
fn event_stream_replays_history_then_follows_live() {
    let sc = common::scenario("i_a.json");
    let request = sc.request.clone();
    let srv = Server::start(sc);
    let id = srv.create();

    let resp = srv.agent.get(format!("{}/sessions/{id}/events", srv.base)).call().unwrap();
    assert_eq!(resp.status().as_u16(), 200);
    assert!(resp.headers().get("content-type").unwrap().to_str().unwrap().starts_with("text/event-stream"));
    let mut reader = BufReader::new(resp.into_body().into_reader());

    // Recorded prefix: session start, then a snapshot.
    let first = read_sse(&mut reader, |name, _| name == "snapshot");
    assert_eq!(first[0].0, "trace");
    assert_eq!(first[0].1["kind"], "session_start");
    assert_eq!(first.last().unwrap().1["session"]["state"], "AwaitRequest");

    let base = srv.base.clone();
    let poster = std::thread::spawn(move || {
        let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
        agent.post(format!("{base}/sessions/{id}/messages")).send_json(json!({"text": request})).unwrap();
    });
    let live = read_sse(&mut reader, |name, v| name == "snapshot" && v["session"]["state"] == "AwaitConfirmation");
    poster.join().unwrap();

    let seqs: Vec<u64> = first.iter().chain(&live).filter(|(n, _)| n == "trace").map(|(_, v)| v["seq"].as_u64().unwrap()).collect();
    assert_eq!(seqs, (0..seqs.len() as u64).collect::<Vec<_>>(), "trace events arrive once and in order");
    assert!(live.iter().any(|(n, v)| n == "trace" && v["kind"] == "state_change" && v["payload"]["to"] == "AwaitConfirmation"));
    let snap = &live.last().unwrap().1;
    assert!(snap["graph"]["workspace"].is_object());
    assert!(snap["world"]["objects"].is_object());
}

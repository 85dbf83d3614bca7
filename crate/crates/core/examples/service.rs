//! Start the HTTP service in-process and drive a session over it.
//!
//! `cargo run --example service`

use lta::eval::{build_session, Backend, Scenario};
use lta::orchestrator::{service, Interaction};
use serde_json::{json, Value};
use std::sync::Arc;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Arc::new(Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/ii_a.json").as_ref())?);
    let request = sc.request.clone();
    let factory: service::SessionFactory =
        Arc::new(move |_| build_session(&sc, 0, sc.seed, Backend::Scripted, Interaction::Interactive).map_err(|e| e.to_string()));

    let (tx, rx) = std::sync::mpsc::channel();
    std::thread::spawn(move || {
        let rt = tokio::runtime::Runtime::new().expect("runtime");
        rt.block_on(async {
            let listener = service::bind(0).await.expect("bind");
            tx.send(listener.local_addr().expect("addr")).expect("send");
            service::serve(listener, factory).await.expect("serve");
        });
    });
    let base = format!("http://{}", rx.recv()?);
    let agent: ureq::Agent = ureq::Agent::config_builder().http_status_as_error(false).build().into();
    let post = |path: &str, body: Value| -> Result<(u16, Value), ureq::Error> {
        let mut r = agent.post(format!("{base}{path}")).send_json(&body)?;
        Ok((r.status().as_u16(), r.body_mut().read_json().unwrap_or(Value::Null)))
    };

    let (_, created) = post("/sessions", json!({}))?;
    let id = created["id"].as_str().unwrap_or_default().to_string();
    println!("session {id}");
    let (_, snap) = post(&format!("/sessions/{id}/messages"), json!({"text": request}))?;
    println!("after request: {}", snap["state"]);
    let (_, snap) = post(&format!("/sessions/{id}/confirm"), json!({}))?;
    println!("after confirm: {}", snap["state"]);
    let (code, err) = post(&format!("/sessions/{id}/confirm"), json!({}))?;
    println!("confirm again: {code} {}", err["error"]);

    let trace = agent.get(format!("{base}/sessions/{id}/trace")).call()?.body_mut().read_to_string()?;
    println!("trace: {} events", trace.lines().count());
    Ok(())
}

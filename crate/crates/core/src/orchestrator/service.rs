//! HTTP service for interactive sessions.
//!
//! | method | path | body | reply |
//! |---|---|---|---|
//! | POST | `/sessions` | – | `{"id"}` |
//! | GET | `/sessions/{id}` | – | session snapshot |
//! | POST | `/sessions/{id}/messages` | `{"text"}` | snapshot |
//! | POST | `/sessions/{id}/confirm` | – | snapshot |
//! | POST | `/sessions/{id}/decline` | – | snapshot |
//! | POST | `/sessions/{id}/intervention` | `{"choice": "skip"\|"abort"\|"reposition", "xy"?, "object"?}` | snapshot |
//! | GET | `/sessions/{id}/trace` | – | NDJSON |
//! | GET | `/sessions/{id}/graph` | – | scene graph JSON |
//! | GET | `/sessions/{id}/world` | – | world JSON |
//! | GET | `/sessions/{id}/events` | – | server-sent events |
//!
//! The event stream first replays the recorded trace, then follows live.
//! Each SSE message has event name `trace` (data: a trace event) or
//! `snapshot` (data: `{"session", "graph", "world"}`, sent after every
//! request that changed the session). Unknown sessions answer 404,
//! actions the state does not admit answer 409.

use super::{Intervention, OrchestratorError, Session};
use axum::extract::{Path, State};
use axum::http::StatusCode;
use axum::response::sse::{Event, KeepAlive, Sse};
use axum::response::{IntoResponse, Response};
use axum::routing::{get, post};
use axum::{Json, Router};
use serde::Deserialize;
use serde_json::{json, Value};
use std::collections::HashMap;
use std::convert::Infallible;
use std::sync::atomic::{AtomicU64, Ordering};
use std::sync::Arc;
use tokio::sync::{broadcast, Mutex};
use tokio_stream::wrappers::BroadcastStream;
use tokio_stream::{Stream, StreamExt};

/// Builds a fresh session for the given id.
pub type SessionFactory = Arc<dyn Fn(&str) -> Result<Session, String> + Send + Sync>;

struct Entry {
    session: Arc<Mutex<Session>>,
    tx: broadcast::Sender<Value>,
}

#[derive(Clone)]
struct AppState {
    factory: SessionFactory,
    sessions: Arc<std::sync::Mutex<HashMap<String, Arc<Entry>>>>,
    next: Arc<AtomicU64>,
}

impl IntoResponse for OrchestratorError {
    fn into_response(self) -> Response {
        let code = match self {
            OrchestratorError::SessionNotFound(_) => StatusCode::NOT_FOUND,
            OrchestratorError::InvalidTransition { .. } => StatusCode::CONFLICT,
            OrchestratorError::InvalidIntervention(_) => StatusCode::BAD_REQUEST,
            _ => StatusCode::INTERNAL_SERVER_ERROR,
        };
        (code, Json(json!({"error": self.to_string()}))).into_response()
    }
}

pub fn router(factory: SessionFactory) -> Router {
    let state = AppState { factory, sessions: Default::default(), next: Arc::new(AtomicU64::new(1)) };
    Router::new()
        .route("/sessions", post(create))
        .route("/sessions/{id}", get(snapshot))
        .route("/sessions/{id}/messages", post(message))
        .route("/sessions/{id}/confirm", post(confirm))
        .route("/sessions/{id}/decline", post(decline))
        .route("/sessions/{id}/intervention", post(intervention))
        .route("/sessions/{id}/trace", get(trace))
        .route("/sessions/{id}/graph", get(graph))
        .route("/sessions/{id}/world", get(world))
        .route("/sessions/{id}/events", get(events))
        .with_state(state)
}

/// Binds `127.0.0.1:port` (0 picks a free port).
pub async fn bind(port: u16) -> Result<tokio::net::TcpListener, OrchestratorError> {
    tokio::net::TcpListener::bind(("127.0.0.1", port)).await.map_err(|e| match e.kind() {
        std::io::ErrorKind::AddrInUse => OrchestratorError::PortInUse(port),
        _ => OrchestratorError::Io(e.to_string()),
    })
}

pub async fn serve(listener: tokio::net::TcpListener, factory: SessionFactory) -> Result<(), OrchestratorError> {
    axum::serve(listener, router(factory)).await.map_err(|e| OrchestratorError::Io(e.to_string()))
}

fn entry(state: &AppState, id: &str) -> Result<Arc<Entry>, OrchestratorError> {
    state
        .sessions
        .lock()
        .expect("session table lock")
        .get(id)
        .cloned()
        .ok_or_else(|| OrchestratorError::SessionNotFound(id.to_string()))
}

fn snapshot_message(s: &Session) -> Value {
    json!({"type": "snapshot", "session": s.snapshot(), "graph": s.graph().to_json(), "world": s.world()})
}

async fn create(State(state): State<AppState>) -> Result<Json<Value>, OrchestratorError> {
    let id = format!("s{}", state.next.fetch_add(1, Ordering::Relaxed));
    let mut session = (state.factory)(&id).map_err(OrchestratorError::Setup)?;
    let (tx, _) = broadcast::channel(4096);
    let sink = tx.clone();
    session.set_sink(Box::new(move |e| {
        let _ = sink.send(json!({"type": "trace", "event": e}));
    }));
    let e = Arc::new(Entry { session: Arc::new(Mutex::new(session)), tx });
    state.sessions.lock().expect("session table lock").insert(id.clone(), e);
    Ok(Json(json!({"id": id})))
}

/// Runs a blocking session action off the async workers; requests for the
/// same session queue on its mutex in arrival order.
async fn act<F>(state: &AppState, id: &str, f: F) -> Result<Json<Value>, OrchestratorError>
where
    F: FnOnce(&mut Session) -> Result<(), OrchestratorError> + Send + 'static,
{
    let e = entry(state, id)?;
    let guard = e.session.clone().lock_owned().await;
    let tx = e.tx.clone();
    tokio::task::spawn_blocking(move || {
        let mut guard = guard;
        f(&mut guard)?;
        let _ = tx.send(snapshot_message(&guard));
        Ok(Json(guard.snapshot()))
    })
    .await
    .map_err(|e| OrchestratorError::Io(e.to_string()))?
}

async fn snapshot(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, OrchestratorError> {
    let e = entry(&state, &id)?;
    let s = e.session.lock().await;
    Ok(Json(s.snapshot()))
}

#[derive(Deserialize)]
struct MessageBody {
    text: String,
}

async fn message(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(body): Json<MessageBody>,
) -> Result<Json<Value>, OrchestratorError> {
    act(&state, &id, move |s| s.submit_request(&body.text)).await
}

async fn confirm(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, OrchestratorError> {
    act(&state, &id, |s| s.confirm()).await
}

async fn decline(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, OrchestratorError> {
    act(&state, &id, |s| s.decline()).await
}

async fn intervention(
    State(state): State<AppState>,
    Path(id): Path<String>,
    Json(choice): Json<Intervention>,
) -> Result<Json<Value>, OrchestratorError> {
    act(&state, &id, move |s| s.intervene(choice)).await
}

async fn trace(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, OrchestratorError> {
    let e = entry(&state, &id)?;
    let s = e.session.lock().await;
    Ok(([("content-type", "application/x-ndjson")], super::to_ndjson(s.trace())).into_response())
}

async fn graph(State(state): State<AppState>, Path(id): Path<String>) -> Result<Response, OrchestratorError> {
    let e = entry(&state, &id)?;
    let s = e.session.lock().await;
    Ok(([("content-type", "application/json")], s.graph().serialize()).into_response())
}

async fn world(State(state): State<AppState>, Path(id): Path<String>) -> Result<Json<Value>, OrchestratorError> {
    let e = entry(&state, &id)?;
    let s = e.session.lock().await;
    Ok(Json(serde_json::to_value(s.world()).map_err(|e| OrchestratorError::Io(e.to_string()))?))
}

fn to_sse(v: Value) -> Event {
    let name = if v["type"] == "snapshot" { "snapshot" } else { "trace" };
    let data = if name == "trace" { v["event"].clone() } else { v };
    Event::default().event(name).data(data.to_string())
}

async fn events(
    State(state): State<AppState>,
    Path(id): Path<String>,
) -> Result<Sse<impl Stream<Item = Result<Event, Infallible>>>, OrchestratorError> {
    let e = entry(&state, &id)?;
    // Subscribe while holding the lock so nothing falls between the
    // recorded prefix and the live tail.
    let (past, rx) = {
        let s = e.session.lock().await;
        let mut past: Vec<Value> = s.trace().iter().map(|ev| json!({"type": "trace", "event": ev})).collect();
        past.push(snapshot_message(&s));
        (past, e.tx.subscribe())
    };
    let live = BroadcastStream::new(rx).filter_map(Result::ok);
    let stream = tokio_stream::iter(past).chain(live).map(|v| Ok(to_sse(v)));
    Ok(Sse::new(stream).keep_alive(KeepAlive::default()))
}

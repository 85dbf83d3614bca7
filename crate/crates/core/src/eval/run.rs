use super::report::{SummaryRow, SuiteReport};
use super::{EvalError, Scenario};
use crate::backends::{
    BackendError, ChatBackend, ChatMessage, HttpConfig, PlannerBackend, PlannerSpec, RemoteChat, RemotePlanner,
    RemoteVlm, ScriptedChat, ScriptedPlanner, ScriptedVlm, VlmBackend, VlmNoise, VlmQuery,
};
use crate::orchestrator::{to_ndjson, Executor, Interaction, Session, SessionConfig, SessionState, TraceEvent};
use crate::planner::has_errors;
use crate::scene_graph::SceneGraph;
use crate::sim::{rng, CaptureResult, WorldState};
use crate::tools::ToolMode;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};
use std::path::PathBuf;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Backend {
    /// Deterministic in-process models.
    #[default]
    Scripted,
    /// HTTP models configured through `LTA_CHAT_*`, `LTA_VLM_*` and
    /// optionally `LTA_PLANNER_*` (falls back to the chat endpoint).
    Remote,
}

#[derive(Debug, Clone, Default)]
pub struct SuiteOptions {
    pub trials: Option<usize>,
    pub seed: Option<u64>,
    pub backend: Backend,
    /// Where report.json, table.txt and traces/ go; nothing is written
    /// when unset.
    pub report_dir: Option<PathBuf>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialReport {
    pub scenario: String,
    pub trial: usize,
    pub seed: u64,
    pub excluded: bool,
    pub pf: Option<u8>,
    pub tcr: Option<u8>,
    pub sgh: Option<f64>,
    pub state: String,
    pub reason: String,
    pub trace: String,
}

/// Seed of trial `trial` under a scenario seed.
pub fn trial_seed(seed: u64, trial: usize) -> u64 {
    rng::mix(seed, &[rng::TRIAL, trial as u64])
}

/// Stands in for a model whose endpoint is not configured.
struct Unavailable(String);

impl ChatBackend for Unavailable {
    fn complete(&mut self, _: &[ChatMessage], _: &[Value]) -> Result<ChatMessage, BackendError> {
        Err(BackendError::BackendUnavailable(self.0.clone()))
    }
}

impl VlmBackend for Unavailable {
    fn query(&mut self, _: &VlmQuery, _: &WorldState, _: &CaptureResult) -> Result<String, BackendError> {
        Err(BackendError::BackendUnavailable(self.0.clone()))
    }
}

impl PlannerBackend for Unavailable {
    fn plan(&mut self, _: &str, _: &SceneGraph, _: ToolMode) -> Result<String, BackendError> {
        Err(BackendError::BackendUnavailable(self.0.clone()))
    }
}

fn remote_models() -> (Box<dyn ChatBackend>, Box<dyn VlmBackend>, Box<dyn PlannerBackend>) {
    let unavailable = |e: BackendError| e.to_string();
    let chat: Box<dyn ChatBackend> = match HttpConfig::from_env("CHAT") {
        Ok(c) => Box::new(RemoteChat::new(c)),
        Err(e) => Box::new(Unavailable(unavailable(e))),
    };
    let vlm: Box<dyn VlmBackend> = match HttpConfig::from_env("VLM") {
        Ok(c) => Box::new(RemoteVlm::new(c)),
        Err(e) => Box::new(Unavailable(unavailable(e))),
    };
    let planner: Box<dyn PlannerBackend> = match HttpConfig::from_env("PLANNER").or_else(|_| HttpConfig::from_env("CHAT")) {
        Ok(c) => Box::new(RemotePlanner::new(c)),
        Err(e) => Box::new(Unavailable(unavailable(e))),
    };
    (chat, vlm, planner)
}

/// A ready-to-run session for one trial of `sc`.
pub fn build_session(
    sc: &Scenario,
    trial: usize,
    base_seed: u64,
    backend: Backend,
    interaction: Interaction,
) -> Result<Session, EvalError> {
    let seed = trial_seed(base_seed, trial);
    let (world, graph) = sc.build(seed, true)?;
    let (chat, vlm, planner): (Box<dyn ChatBackend>, Box<dyn VlmBackend>, Box<dyn PlannerBackend>) = match backend {
        Backend::Scripted => (
            Box::new(ScriptedChat),
            Box::new(ScriptedVlm::new(sc.vlm)),
            Box::new(ScriptedPlanner::new(sc.planner.clone())),
        ),
        Backend::Remote => remote_models(),
    };
    let mut exec = Executor::new(world, graph, sc.mode, vlm, planner);
    exec.perception = sc.perception;
    let config = SessionConfig { mode: sc.mode, interaction, auto_response: sc.intervention.clone(), ..Default::default() };
    let meta = json!({"scenario": sc.id, "seed": base_seed, "trial": trial, "trial_seed": seed, "request": sc.request});
    Ok(Session::new(format!("{}_trial{trial}", sc.id), config, exec, chat, meta))
}

/// Executes `plan_text` with noise-free perception and no faults, assuming
/// the world behaves; true when the success predicates then hold.
pub fn dry_run(sc: &Scenario, seed: u64, plan_text: &str) -> Result<bool, EvalError> {
    let (world, graph) = sc.build(seed, false)?;
    let noise = VlmNoise { jitter_px: 0, presence_false_negative: 0.0, presence_false_positive: 0.0, ..sc.vlm };
    let planner = ScriptedPlanner::new(PlannerSpec::Fixed { plan: plan_text.to_string() });
    let mut exec = Executor::new(world, graph, sc.mode, Box::new(ScriptedVlm::new(noise)), Box::new(planner));
    exec.perception = sc.perception;
    exec.oracle = true;
    let config = SessionConfig { mode: sc.mode, max_retries: 1, ..Default::default() };
    let mut s = Session::new("dry_run", config, exec, Box::new(ScriptedChat), Value::Null);
    s.run_request(&sc.request)?;
    Ok(s.state() == SessionState::Done && sc.success.iter().all(|p| p.holds(s.world(), s.graph())))
}

/// Scores a finished session.
pub fn score_session(sc: &Scenario, session: &Session, trial: usize, seed: u64) -> Result<TrialReport, EvalError> {
    let mut r = TrialReport {
        scenario: sc.id.clone(),
        trial,
        seed,
        excluded: session.excluded(),
        pf: None,
        tcr: None,
        sgh: None,
        state: session.state().name().to_string(),
        reason: session.end_reason().unwrap_or_default().to_string(),
        trace: format!("traces/{}_trial{trial}.ndjson", sc.id),
    };
    if r.excluded {
        return Ok(r);
    }
    let (world, graph) = (session.world(), session.graph());
    let done = session.state() == SessionState::Done;
    r.tcr = Some(u8::from(done && sc.success.iter().all(|p| p.holds(world, graph))));
    r.sgh = Some(if sc.sgh.is_empty() {
        1.0
    } else {
        sc.sgh.iter().filter(|p| p.holds(world, graph)).count() as f64 / sc.sgh.len() as f64
    });
    r.pf = Some(match session.plan() {
        None => 0,
        Some(plan) => {
            let (_, g0) = sc.build(seed, false)?;
            let clean = !has_errors(&crate::planner::validate_plan_for(plan, &g0, sc.mode));
            u8::from(clean && dry_run(sc, seed, &plan.render())?)
        }
    });
    Ok(r)
}

pub fn run_trial(sc: &Scenario, trial: usize, base_seed: u64, backend: Backend) -> Result<(TrialReport, Vec<TraceEvent>), EvalError> {
    let mut s = build_session(sc, trial, base_seed, backend, Interaction::Batch)?;
    s.run_request(&sc.request)?;
    let report = score_session(sc, &s, trial, trial_seed(base_seed, trial))?;
    Ok((report, s.trace().to_vec()))
}

/// Runs every trial of one scenario; returns the reports and the traces.
pub fn run_scenario(sc: &Scenario, opts: &SuiteOptions) -> Result<(Vec<TrialReport>, Vec<Vec<TraceEvent>>), EvalError> {
    let trials = opts.trials.unwrap_or(sc.trials);
    let seed = opts.seed.unwrap_or(sc.seed);
    let results: Vec<Result<(TrialReport, Vec<TraceEvent>), EvalError>> = std::thread::scope(|scope| {
        let handles: Vec<_> =
            (0..trials).map(|k| scope.spawn(move || run_trial(sc, k, seed, opts.backend))).collect();
        handles.into_iter().map(|h| h.join().expect("trial thread panicked")).collect()
    });
    let mut reports = Vec::new();
    let mut traces = Vec::new();
    for r in results {
        let (rep, tr) = r?;
        reports.push(rep);
        traces.push(tr);
    }
    Ok((reports, traces))
}

/// Runs all scenarios and writes the report directory if requested.
pub fn run_suite(scenarios: &[Scenario], opts: &SuiteOptions) -> Result<SuiteReport, EvalError> {
    let mut rows = Vec::new();
    let mut trials = Vec::new();
    let mut files = Vec::new();
    for sc in scenarios {
        let (reports, traces) = run_scenario(sc, opts)?;
        rows.push(SummaryRow::from_trials(&sc.id, &reports));
        for (r, t) in reports.iter().zip(&traces) {
            files.push((r.trace.clone(), to_ndjson(t)));
        }
        trials.extend(reports);
    }
    let report = SuiteReport { rows, trials };
    if let Some(dir) = &opts.report_dir {
        report.write(dir, &files)?;
    }
    Ok(report)
}

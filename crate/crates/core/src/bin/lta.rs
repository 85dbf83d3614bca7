use clap::{Parser, Subcommand, ValueEnum};
use lta::eval::{build_session, run_suite, score_session, trial_seed, Backend, Scenario, SuiteOptions};
use lta::orchestrator::{lint, parse_ndjson, replay, service, Intervention, Interaction, Session, SessionState};
use lta::planner::{has_errors, parse_plan, validate_plan_for};
use lta::scene_graph::SceneGraph;
use lta::tools::ToolMode;
use std::io::{BufRead, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;

#[derive(Parser)]
#[command(name = "lta", version, about = "Scene-graph language-to-action runner")]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum BackendArg {
    Scripted,
    Remote,
}

impl From<BackendArg> for Backend {
    fn from(b: BackendArg) -> Self {
        match b {
            BackendArg::Scripted => Backend::Scripted,
            BackendArg::Remote => Backend::Remote,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    Batch,
    Interactive,
}

#[derive(Clone, Copy, ValueEnum)]
enum ToolModeArg {
    Vlm,
    Apriltag,
}

#[derive(Subcommand)]
enum Cmd {
    /// Run scenario trials and score them.
    Run {
        /// Scenario file or directory of scenario files; repeatable.
        #[arg(long, required = true)]
        scenario: Vec<PathBuf>,
        #[arg(long)]
        trials: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendArg,
        #[arg(long, value_enum, default_value = "batch")]
        mode: ModeArg,
        #[arg(long)]
        report: Option<PathBuf>,
    },
    /// Serve interactive sessions of one scenario over HTTP.
    Serve {
        #[arg(long, default_value_t = 8080)]
        port: u16,
        #[arg(long)]
        scenario: PathBuf,
        #[arg(long, value_enum, default_value = "scripted")]
        backend: BackendArg,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-execute a recorded trace and compare final states.
    Replay {
        #[arg(long)]
        trace: PathBuf,
    },
    /// Check a plan against the rules for a scene graph.
    ValidatePlan {
        #[arg(long)]
        plan: PathBuf,
        #[arg(long)]
        graph: PathBuf,
        #[arg(long, value_enum, default_value = "vlm")]
        mode: ToolModeArg,
    },
    /// Structural difference between two scene-graph files.
    GraphDiff { a: PathBuf, b: PathBuf },
}

fn read(path: &Path) -> Result<String, String> {
    std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))
}

fn load_scenarios(paths: &[PathBuf]) -> Result<Vec<Scenario>, String> {
    let mut files = Vec::new();
    for p in paths {
        if p.is_dir() {
            let mut found: Vec<PathBuf> = std::fs::read_dir(p)
                .map_err(|e| format!("{}: {e}", p.display()))?
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|f| f.extension().is_some_and(|x| x == "json"))
                .collect();
            found.sort();
            files.extend(found);
        } else {
            files.push(p.clone());
        }
    }
    files.iter().map(|f| Scenario::load(f).map_err(|e| e.to_string())).collect()
}

fn prompt(line: &str) -> Option<String> {
    print!("{line}");
    std::io::stdout().flush().ok();
    let mut s = String::new();
    match std::io::stdin().lock().read_line(&mut s) {
        Ok(0) | Err(_) => None,
        Ok(_) => Some(s.trim().to_string()),
    }
}

fn print_new(session: &Session, seen: &mut usize) {
    for m in &session.history()[*seen..] {
        let who = match m.role {
            lta::backends::Role::Assistant => "robot",
            lta::backends::Role::Tool => "tool",
            _ => continue,
        };
        if !m.content.is_empty() {
            println!("[{who}] {}", m.content);
        }
        for c in &m.tool_calls {
            println!("[call] {} {}", c.name, serde_json::Value::Object(c.arguments.clone()));
        }
    }
    *seen = session.history().len();
}

fn parse_intervention(answer: &str) -> Option<Intervention> {
    let mut words = answer.split_whitespace();
    match words.next()? {
        "skip" | "s" => Some(Intervention::Skip),
        "abort" | "a" => Some(Intervention::Abort),
        "reposition" | "r" => {
            let x = words.next()?.parse().ok()?;
            let y = words.next()?.parse().ok()?;
            Some(Intervention::Reposition { object: None, xy: [x, y] })
        }
        _ => None,
    }
}

fn run_interactive(sc: &Scenario, seed: u64, backend: Backend) -> Result<(), String> {
    let mut s = build_session(sc, 0, seed, backend, Interaction::Interactive).map_err(|e| e.to_string())?;
    let request = prompt(&format!("request [{}]: ", sc.request)).filter(|r| !r.is_empty()).unwrap_or(sc.request.clone());
    let mut seen = 0;
    s.submit_request(&request).map_err(|e| e.to_string())?;
    loop {
        print_new(&s, &mut seen);
        match s.state() {
            SessionState::AwaitConfirmation => {
                let yes = prompt("execute? [y/N] ").is_some_and(|a| a.eq_ignore_ascii_case("y") || a.eq_ignore_ascii_case("yes"));
                if yes { s.confirm() } else { s.decline() }.map_err(|e| e.to_string())?;
            }
            SessionState::AwaitUserIntervention => {
                if let Some(sug) = s.suggestion() {
                    println!("[help] step {} failed: {} (options: {})", sug.step, sug.reason, sug.options.join(", "));
                }
                let choice = loop {
                    let Some(a) = prompt("skip | abort | reposition X Y: ") else { break Intervention::Abort };
                    if let Some(c) = parse_intervention(&a) {
                        break c;
                    }
                };
                if let Err(e) = s.intervene(choice) {
                    println!("[error] {e}");
                }
            }
            st if st.is_terminal() => break,
            other => return Err(format!("session stopped in {other}")),
        }
    }
    print_new(&s, &mut seen);
    let r = score_session(sc, &s, 0, trial_seed(seed, 0)).map_err(|e| e.to_string())?;
    println!("{}", serde_json::to_string_pretty(&r).expect("report serializes"));
    Ok(())
}

fn run(cmd: Cmd) -> Result<ExitCode, String> {
    match cmd {
        Cmd::Run { scenario, trials, seed, backend, mode, report } => {
            let scenarios = load_scenarios(&scenario)?;
            match mode {
                ModeArg::Interactive => {
                    let [sc] = scenarios.as_slice() else {
                        return Err("interactive mode takes exactly one scenario".into());
                    };
                    run_interactive(sc, seed.unwrap_or(sc.seed), backend.into())?;
                }
                ModeArg::Batch => {
                    let opts = SuiteOptions { trials, seed, backend: backend.into(), report_dir: report };
                    let rep = run_suite(&scenarios, &opts).map_err(|e| e.to_string())?;
                    print!("{}", rep.table());
                }
            }
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Serve { port, scenario, backend, seed } => {
            let sc = Arc::new(Scenario::load(&scenario).map_err(|e| e.to_string())?);
            let seed = seed.unwrap_or(sc.seed);
            let backend: Backend = backend.into();
            let counter = Arc::new(AtomicUsize::new(0));
            let factory: service::SessionFactory = Arc::new(move |_id: &str| {
                let k = counter.fetch_add(1, Ordering::SeqCst);
                build_session(&sc, k, seed, backend, Interaction::Interactive).map_err(|e| e.to_string())
            });
            let rt = tokio::runtime::Runtime::new().map_err(|e| e.to_string())?;
            rt.block_on(async {
                let listener = service::bind(port).await.map_err(|e| e.to_string())?;
                eprintln!("listening on http://{}", listener.local_addr().map_err(|e| e.to_string())?);
                service::serve(listener, factory).await.map_err(|e| e.to_string())
            })?;
            Ok(ExitCode::SUCCESS)
        }
        Cmd::Replay { trace } => {
            let events = parse_ndjson(&read(&trace)?)?;
            for problem in lint(&events) {
                println!("lint: {problem}");
            }
            let r = replay(&events).map_err(|e| e.to_string())?;
            println!(
                "calls: {}  graph: {}  world: {}",
                r.calls,
                if r.graph_matches { "match" } else { "DIFFERS" },
                if r.world_matches { "match" } else { "DIFFERS" }
            );
            for d in &r.diverged {
                println!("diverged: {d}");
            }
            Ok(if r.ok() { ExitCode::SUCCESS } else { ExitCode::FAILURE })
        }
        Cmd::ValidatePlan { plan, graph, mode } => {
            let plan = parse_plan(&read(&plan)?).map_err(|e| e.to_string())?;
            let graph = SceneGraph::deserialize(&read(&graph)?).map_err(|e| e.to_string())?;
            let mode = match mode {
                ToolModeArg::Vlm => ToolMode::Vlm,
                ToolModeArg::Apriltag => ToolMode::Apriltag,
            };
            let found = validate_plan_for(&plan, &graph, mode);
            for v in &found {
                println!("{:?} {:?} step {}: {}", v.severity, v.rule, v.step, v.message);
            }
            if found.is_empty() {
                println!("ok: {} steps, no violations", plan.steps.len());
            }
            Ok(if has_errors(&found) { ExitCode::FAILURE } else { ExitCode::SUCCESS })
        }
        Cmd::GraphDiff { a, b } => {
            let ga = SceneGraph::deserialize(&read(&a)?).map_err(|e| e.to_string())?;
            let gb = SceneGraph::deserialize(&read(&b)?).map_err(|e| e.to_string())?;
            let delta = ga.diff(&gb);
            println!("{}", serde_json::to_string_pretty(&delta).expect("delta serializes"));
            Ok(if delta.is_empty() { ExitCode::SUCCESS } else { ExitCode::from(1) })
        }
    }
}

fn main() -> ExitCode {
    match run(Cli::parse().cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(2)
        }
    }
}

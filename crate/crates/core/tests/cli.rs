use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::{Command, Output, Stdio};

fn root() -> &'static Path {
    Path::new(env!("CARGO_MANIFEST_DIR"))
}

fn fixture(rel: &str) -> PathBuf {
    root().join("tests/fixtures").join(rel)
}

fn lta(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_lta")).args(args).output().unwrap()
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

#[test]
fn validate_plan_reports_violations_through_the_exit_code() {
    let graph = fixture("iii_a_initial.json");
    let bad = lta(&[
        "validate-plan",
        "--plan",
        fixture("plans/violating/01_r1_scan_while_holding.plan").to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
    ]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(stdout(&bad).contains("R1 step 3"), "{}", stdout(&bad));

    let good = lta(&[
        "validate-plan",
        "--plan",
        fixture("plans/clean/01_scan_then_sort.plan").to_str().unwrap(),
        "--graph",
        graph.to_str().unwrap(),
    ]);
    assert_eq!(good.status.code(), Some(0));
    assert!(stdout(&good).starts_with("ok: 5 steps"));
}

#[test]
fn graph_diff_prints_the_delta() {
    let (a, b) = (fixture("iii_a_initial.json"), fixture("iii_a_final.json"));
    let o = lta(&["graph-diff", a.to_str().unwrap(), b.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(1));
    let delta: serde_json::Value = serde_json::from_str(&stdout(&o)).unwrap();
    assert_eq!(delta["reparented"].as_array().unwrap().len(), 5);
    let same = lta(&["graph-diff", a.to_str().unwrap(), a.to_str().unwrap()]);
    assert_eq!(same.status.code(), Some(0));
}

#[test]
fn batch_run_writes_a_report_that_replays() {
    let dir = tempfile::tempdir().unwrap();
    let scenario = root().join("scenarios/ii_b.json");
    let o = lta(&[
        "run",
        "--scenario",
        scenario.to_str().unwrap(),
        "--trials",
        "2",
        "--seed",
        "5",
        "--backend",
        "scripted",
        "--mode",
        "batch",
        "--report",
        dir.path().to_str().unwrap(),
    ]);
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    assert!(stdout(&o).contains("II-B     100      100      100"), "{}", stdout(&o));
    assert_eq!(std::fs::read_to_string(dir.path().join("table.txt")).unwrap(), stdout(&o));
    let report: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(dir.path().join("report.json")).unwrap()).unwrap();
    let trace = dir.path().join(report["trials"][1]["trace"].as_str().unwrap());

    let r = lta(&["replay", "--trace", trace.to_str().unwrap()]);
    assert!(r.status.success(), "{}", stdout(&r));
    assert!(stdout(&r).contains("graph: match  world: match"), "{}", stdout(&r));
}

#[test]
fn interactive_run_asks_before_moving() {
    let scenario = root().join("scenarios/ii_a.json");
    let mut child = Command::new(env!("CARGO_BIN_EXE_lta"))
        .args(["run", "--scenario", scenario.to_str().unwrap(), "--mode", "interactive"])
        .stdin(Stdio::piped())
        .stdout(Stdio::piped())
        .stderr(Stdio::piped())
        .spawn()
        .unwrap();
    // Default request, then accept the plan.
    child.stdin.take().unwrap().write_all(b"\ny\n").unwrap();
    let o = child.wait_with_output().unwrap();
    assert!(o.status.success(), "{}", String::from_utf8_lossy(&o.stderr));
    let out = stdout(&o);
    assert!(out.contains("execute? [y/N]"));
    let json_start = out.rfind("\n{").unwrap();
    let score: serde_json::Value = serde_json::from_str(&out[json_start..]).unwrap();
    assert_eq!(score["tcr"], 1, "{out}");
}

#[test]
fn bad_input_exits_with_code_two() {
    let o = lta(&["replay", "--trace", "/nonexistent/trace.ndjson"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).starts_with("error:"));
}

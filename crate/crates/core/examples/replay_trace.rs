//! Record a trial's trace as NDJSON, then replay it against a fresh world.
//!
//! `cargo run --example replay_trace`

use lta::eval::{run_trial, Backend, Scenario};
use lta::orchestrator::{lint, parse_ndjson, replay, to_ndjson};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/ii_b.json").as_ref())?;
    let (report, trace) = run_trial(&sc, 0, sc.seed, Backend::Scripted)?;
    let text = to_ndjson(&trace);
    println!("{} events, {} bytes, tcr {:?}", trace.len(), text.len(), report.tcr);
    for line in text.lines().take(3) {
        println!("  {}", line.chars().take(120).collect::<String>());
    }

    let events = parse_ndjson(&text)?;
    println!("lint problems: {}", lint(&events).len());
    let r = replay(&events)?;
    println!("replayed {} calls: graph {} world {}", r.calls, r.graph_matches, r.world_matches);
    Ok(())
}

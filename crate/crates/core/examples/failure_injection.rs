//! Inject grasp slips and watch the retry policy, then an operator fix.
//!
//! `cargo run --example failure_injection`

use lta::eval::{run_trial, Backend, Scenario};
use lta::orchestrator::{EventKind, Intervention};
use lta::sim::FaultSpec;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/iii_a.json").as_ref())?;
    for (slips, intervention) in [
        (1, Intervention::Abort),
        (3, Intervention::Abort),
        (3, Intervention::Reposition { object: None, xy: [0.0, -0.4] }),
    ] {
        sc.faults = vec![FaultSpec::GraspSlip { count: slips, object: Some("apple".into()) }];
        sc.intervention = intervention.clone();
        let (rep, trace) = run_trial(&sc, 0, sc.seed, Backend::Scripted)?;
        println!("{slips} slip(s), operator {intervention:?}: tcr {:?}", rep.tcr);
        for e in trace.iter().filter(|e| matches!(e.kind, EventKind::FailureDecision | EventKind::Suggestion | EventKind::Intervention)) {
            println!("  {:?} {}", e.kind, e.payload);
        }
    }
    Ok(())
}

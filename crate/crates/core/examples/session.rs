//! Drive one interactive session by hand: request, plan, confirm, execute.
//!
//! `cargo run --example session`

use lta::eval::{build_session, Backend, Scenario};
use lta::orchestrator::Interaction;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/ii_a.json").as_ref())?;
    let mut s = build_session(&sc, 0, sc.seed, Backend::Scripted, Interaction::Interactive)?;
    println!("state: {}", s.state().name());

    s.submit_request(&sc.request)?;
    println!("state: {}", s.state().name());
    if let Some(plan) = s.plan() {
        print!("{}", plan.render());
    }

    s.confirm()?;
    println!("state: {}  ({:?})", s.state().name(), s.end_reason());
    for m in s.history().iter().rev().take(1) {
        println!("last message: {}", m.content);
    }
    Ok(())
}

//! Run scripted trials of one scenario and print the summary table.
//!
//! `cargo run --example run_scenario -- scenarios/ii_a.json 3`

use lta::eval::{render_table, run_scenario, Backend, Scenario, SummaryRow, SuiteOptions};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let mut args = std::env::args().skip(1);
    let path = args.next().unwrap_or_else(|| concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/iii_a.json").into());
    let trials = args.next().map(|s| s.parse()).transpose()?;
    let sc = Scenario::load(path.as_ref())?;

    let opts = SuiteOptions { trials, seed: None, backend: Backend::Scripted, report_dir: None };
    let (reports, _) = run_scenario(&sc, &opts)?;
    for r in &reports {
        println!("trial {} seed {:>20}  pf {:?} tcr {:?} sgh {:?}  {}", r.trial, r.seed, r.pf, r.tcr, r.sgh, r.reason);
    }
    print!("{}", render_table(&[SummaryRow::from_trials(&sc.id, &reports)]));
    Ok(())
}

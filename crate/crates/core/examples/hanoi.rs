//! Optimal Tower of Hanoi plans as robot tool calls.
//!
//! `cargo run --example hanoi -- 4`

use lta::planner::{hanoi_moves, solve_hanoi, MAX_DISCS};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n: usize = std::env::args().nth(1).map(|s| s.parse()).transpose()?.unwrap_or(3);
    let plan = solve_hanoi(n, "base_1", "base_3", "base_2")?;
    println!("{n} discs (max {MAX_DISCS}): {} moves, {} tool calls", hanoi_moves(n, 0, 2, 1).len(), plan.steps.len());
    print!("{}", plan.render());
    Ok(())
}

use super::plan::{ArgValue, Placeholder, Plan, PlanStep};
use super::PlannerError;
use crate::tools;

/// One disc move: disc index (0 = smallest) from peg `from` to peg `to`
/// (peg indices into the setup's peg list).
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct HanoiMove {
    pub disc: usize,
    pub from: usize,
    pub to: usize,
}

/// Optimal move sequence for `n` discs.
pub fn hanoi_moves(n: usize, from: usize, to: usize, spare: usize) -> Vec<HanoiMove> {
    fn rec(k: usize, from: usize, to: usize, spare: usize, out: &mut Vec<HanoiMove>) {
        if k == 0 {
            return;
        }
        rec(k - 1, from, spare, to, out);
        out.push(HanoiMove { disc: k - 1, from, to });
        rec(k - 1, spare, to, from, out);
    }
    let mut out = Vec::with_capacity((1usize << n.min(20)) - 1);
    rec(n, from, to, spare, &mut out);
    out
}

#[derive(Debug, Clone, PartialEq)]
pub struct HanoiSetup {
    /// Disc node names with their tag ids, smallest disc first.
    pub discs: Vec<(String, u32)>,
    /// Source, target, spare peg node names.
    pub pegs: [String; 3],
}

impl HanoiSetup {
    /// `disc_1` (smallest, tag 1) .. `disc_n` on the given pegs.
    pub fn standard(n: usize, from: &str, to: &str, spare: &str) -> Self {
        Self {
            discs: (1..=n).map(|k| (format!("disc_{k}"), k as u32)).collect(),
            pegs: [from.to_string(), to.to_string(), spare.to_string()],
        }
    }
}

pub const MAX_DISCS: usize = 8;

pub fn solve_hanoi(n: usize, from: &str, to: &str, spare: &str) -> Result<Plan, PlannerError> {
    solve_hanoi_setup(&HanoiSetup::standard(n, from, to, spare))
}

/// Tag-driven plan: each move is pick, place onto whatever ends up
/// underneath, one tag read, then graph edits for the moved disc.
pub fn solve_hanoi_setup(setup: &HanoiSetup) -> Result<Plan, PlannerError> {
    let n = setup.discs.len();
    if n == 0 || n > MAX_DISCS {
        return Err(PlannerError::InvalidConfiguration(format!("{n} discs; supported range is 1..={MAX_DISCS}")));
    }
    let [a, b, c] = &setup.pegs;
    if a == b || b == c || a == c {
        return Err(PlannerError::InvalidConfiguration("pegs must be distinct".into()));
    }
    // Peg stacks of disc indices, bottom first.
    let mut pegs: [Vec<usize>; 3] = [(0..n).rev().collect(), vec![], vec![]];
    let mut steps = Vec::new();
    for m in hanoi_moves(n, 0, 1, 2) {
        let disc = pegs[m.from].pop().expect("legal move");
        debug_assert_eq!(disc, m.disc);
        let below = pegs[m.to].last().map_or(setup.pegs[m.to].as_str(), |&d| setup.discs[d].0.as_str());
        let (name, tag) = (&setup.discs[disc].0, setup.discs[disc].1);
        steps.push(PlanStep::new(tools::PICK).arg("object_name", ArgValue::text(name)));
        steps.push(PlanStep::new(tools::PLACE).arg("place_position_name", ArgValue::text(below)));
        steps.push(PlanStep::new(tools::APRILTAGS).arg("trigger", ArgValue::Bool(true)));
        let read = steps.len();
        steps.push(
            PlanStep::new(tools::EDIT)
                .arg("node_name", ArgValue::text(name))
                .arg("attribute_name", ArgValue::text("coordinates"))
                .arg("value", ArgValue::Placeholder(Placeholder { step: read, path: vec![format!("tag_{tag}")] })),
        );
        steps.push(
            PlanStep::new(tools::EDIT)
                .arg("node_name", ArgValue::text(below))
                .arg("attribute_name", ArgValue::text("contains"))
                .arg("value", ArgValue::list([name.as_str()])),
        );
        pegs[m.to].push(disc);
    }
    let rationale = format!(
        "Move {n} discs from {a} to {b} using {c}: {} moves, each followed by a tag read.",
        (1usize << n) - 1
    );
    Ok(Plan::new(steps, rationale))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn counts() {
        for n in 1..=8 {
            assert_eq!(hanoi_moves(n, 0, 1, 2).len(), (1 << n) - 1);
        }
        let p = solve_hanoi(1, "base_1", "base_3", "base_2").unwrap();
        assert_eq!(p.steps.iter().filter(|s| tools::is_motion(&s.tool)).count(), 2);
        assert_eq!(p.steps[1].text_arg("place_position_name"), Some("base_3"));
    }

    #[test]
    fn invalid() {
        assert!(matches!(solve_hanoi(0, "a", "b", "c"), Err(PlannerError::InvalidConfiguration(_))));
        assert!(matches!(solve_hanoi(9, "a", "b", "c"), Err(PlannerError::InvalidConfiguration(_))));
        assert!(matches!(solve_hanoi(3, "a", "a", "c"), Err(PlannerError::InvalidConfiguration(_))));
    }
}

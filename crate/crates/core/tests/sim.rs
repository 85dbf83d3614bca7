use lta::sim::{Support, WorldSpec, WorldState};
use proptest::prelude::*;
use serde_json::json;

fn world() -> WorldState {
    let spec: WorldSpec = serde_json::from_value(json!({"objects": [
        {"name": "crate", "shape": {"kind": "box", "w": 0.2, "d": 0.16, "h": 0.07}, "xy": [0.3, -0.8], "container": true},
        {"name": "block_a", "shape": {"kind": "box", "w": 0.06, "d": 0.06, "h": 0.05}, "xy": [-0.3, -0.5]},
        {"name": "block_b", "shape": {"kind": "box", "w": 0.06, "d": 0.06, "h": 0.05}, "xy": [-0.1, -0.5]},
        {"name": "cube", "shape": {"kind": "box", "w": 0.04, "d": 0.04, "h": 0.04}, "xy": [0.1, -0.5]},
        {"name": "ball", "shape": {"kind": "sphere", "r": 0.03}, "xy": [0.3, -0.5]},
        {"name": "can", "shape": {"kind": "cylinder", "r": 0.03, "h": 0.1}, "xy": [-0.3, -0.8]}
    ]})).unwrap();
    spec.build(1, false, &[]).unwrap()
}

#[derive(Debug, Clone)]
enum Op {
    Pick(usize),
    PlaceOn(usize),
    PlaceAt(f64, f64),
    Reposition(usize, f64, f64),
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        (0..6usize).prop_map(Op::Pick),
        (0..6usize).prop_map(Op::PlaceOn),
        (-0.6..0.6f64, -1.0..-0.2f64).prop_map(|(x, y)| Op::PlaceAt(x, y)),
        (0..6usize, -0.45..0.45f64, -0.9..-0.3f64).prop_map(|(i, x, y)| Op::Reposition(i, x, y)),
    ]
}

fn name(w: &WorldState, i: usize) -> String {
    w.objects.keys().nth(i % w.objects.len()).unwrap().clone()
}

fn apply(w: &mut WorldState, op: &Op) {
    let _ = match op {
        Op::Pick(i) => {
            let n = name(w, *i);
            let p = w.objects[&n].position;
            w.pick(&n, p).map(|_| ())
        }
        Op::PlaceOn(i) => {
            let p = w.objects[&name(w, *i)].position;
            w.place(p).map(|_| ())
        }
        Op::PlaceAt(x, y) => w.place([*x, *y, 0.0]).map(|_| ()),
        Op::Reposition(i, x, y) => {
            let n = name(w, *i);
            w.reposition(&n, [*x, *y])
        }
    };
}

fn sorted_names(w: &WorldState) -> Vec<String> {
    let mut v: Vec<String> = w.objects.keys().cloned().collect();
    v.sort();
    v
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(96))]

    #[test]
    fn names_are_conserved_and_support_is_a_forest(ops in prop::collection::vec(op(), 0..30)) {
        let mut w = world();
        let names = sorted_names(&w);
        for op in &ops {
            apply(&mut w, op);
            prop_assert_eq!(sorted_names(&w), names.clone());
            prop_assert!(w.check_invariants().is_ok(), "{:?}", w.check_invariants());
            // Every support chain ends at the table.
            for n in w.support.keys() {
                let mut cur = n.clone();
                let mut hops = 0;
                while let Some(s) = w.support[&cur].supporter() {
                    cur = s.to_string();
                    hops += 1;
                    prop_assert!(hops <= names.len());
                }
                prop_assert_eq!(&w.support[&cur], &Support::Table);
            }
        }
    }

    #[test]
    fn place_then_pick_at_the_result_restores_the_hold(
        who in 0..6usize,
        x in -0.45..0.45f64,
        y in -0.9..-0.3f64,
    ) {
        let mut w = world();
        let n = name(&w, who);
        prop_assume!(n != "crate");
        let at = w.objects[&n].position;
        w.pick(&n, at).unwrap();
        let Ok(out) = w.place([x, y, 0.0]) else { return Ok(()) };
        let before = w.objects[&n].clone();
        w.pick(&n, out.position).unwrap();
        prop_assert!(w.is_held(&n));
        prop_assert_eq!(&w.objects[&n], &before);
    }

    #[test]
    fn covered_lower_object_is_hidden_from_above(x in -0.35..0.1f64, y in -0.8..-0.4f64) {
        let mut w = world();
        let clear = w.objects.values().filter(|o| o.name != "block_a").all(|o| (o.position[0] - x).hypot(o.position[1] - y) > 0.12);
        prop_assume!(clear);
        w.reposition("block_a", [x, y]).unwrap();
        let b = w.objects["block_b"].position;
        w.pick("block_b", b).unwrap();
        let top = w.objects["block_a"].position;
        let out = w.place(top).unwrap();
        prop_assert_eq!(out.support, Support::On("block_a".into()));
        let cap = w.capture(0).unwrap();
        prop_assert!(cap.is_visible("block_b"));
        prop_assert!(!cap.is_visible("block_a"));
    }
}

#[test]
fn anything_on_top_hides_the_base_even_when_smaller() {
    let mut w = world();
    let c = w.objects["cube"].position;
    w.pick("cube", c).unwrap();
    let base = w.objects["block_a"].position;
    let out = w.place(base).unwrap();
    assert_eq!(out.support, Support::On("block_a".into()));
    for view in 0..3 {
        let cap = w.capture(view).unwrap();
        assert!(cap.is_visible("cube"));
        assert!(!cap.is_visible("block_a"), "view {view}");
    }
    // And it cannot be grasped until the cube is gone.
    assert!(w.pick("block_a", base).is_err());
}

#[test]
fn identical_seeds_give_identical_worlds_and_captures() {
    let a = world();
    let b = world();
    assert_eq!(serde_json::to_string(&a).unwrap(), serde_json::to_string(&b).unwrap());
    let (mut a, mut b) = (a, b);
    assert_eq!(a.capture(1).unwrap(), b.capture(1).unwrap());
}

use lta::scene_graph::{Attribute, AttributeValue, SceneGraph, SceneNode, ROOT};
use proptest::prelude::*;
use std::collections::HashMap;

#[derive(Debug, Clone)]
enum Op {
    Add { parent: usize, affordance: Vec<String>, notes: String },
    Reparent { parent: usize, child: usize },
    Coordinates { node: usize, xyz: Option<[f64; 3]> },
    Text { node: usize, text: String },
}

fn coordinate() -> impl Strategy<Value = f64> {
    prop_oneof![-2.0..2.0f64, any::<i32>().prop_map(|i| i as f64 * 1e-7), Just(0.1497023242712021)]
}

fn op() -> impl Strategy<Value = Op> {
    prop_oneof![
        3 => (any::<usize>(), prop::collection::vec("[a-z ]{1,10}", 0..3), ".{0,20}")
            .prop_map(|(parent, affordance, notes)| Op::Add { parent, affordance, notes }),
        2 => (any::<usize>(), any::<usize>()).prop_map(|(parent, child)| Op::Reparent { parent, child }),
        2 => (any::<usize>(), prop::option::of([coordinate(), coordinate(), coordinate()]))
            .prop_map(|(node, xyz)| Op::Coordinates { node, xyz }),
        1 => (any::<usize>(), ".{0,30}").prop_map(|(node, text)| Op::Text { node, text }),
    ]
}

fn nth(g: &SceneGraph, k: usize) -> String {
    let names: Vec<&str> = g.names().collect();
    names[k % names.len()].to_string()
}

/// Applies one operation; rejected operations leave the graph unchanged.
fn step(g: &SceneGraph, op: &Op, counter: &mut usize) -> SceneGraph {
    let result = match op {
        Op::Add { parent, affordance, notes } => {
            *counter += 1;
            let node = SceneNode::new(format!("obj_{counter}"))
                .with_affordance(affordance.clone())
                .with_things_to_know(notes.clone());
            g.add_object(node, &nth(g, *parent))
        }
        Op::Reparent { parent, child } => {
            let p = nth(g, *parent);
            let c = nth(g, *child);
            let mut list = g.get(&p).unwrap().contains.clone();
            if !list.contains(&c) {
                list.push(c);
            }
            g.edit_attribute(&p, Attribute::Contains, AttributeValue::List(list))
        }
        Op::Coordinates { node, xyz } => {
            g.edit_attribute(&nth(g, *node), Attribute::Coordinates, AttributeValue::Coordinates(*xyz))
        }
        Op::Text { node, text } => {
            g.edit_attribute(&nth(g, *node), Attribute::ThingsToKnow, AttributeValue::Text(text.clone()))
        }
    };
    result.unwrap_or_else(|_| g.clone())
}

fn build(ops: &[Op]) -> SceneGraph {
    let mut counter = 0;
    ops.iter().fold(SceneGraph::new(), |g, op| step(&g, op, &mut counter))
}

/// Independent structure check: every non-root node has exactly one parent
/// and walking parents from any node reaches the root.
fn assert_forest(g: &SceneGraph) {
    let mut parents: HashMap<&str, Vec<&str>> = HashMap::new();
    for n in g.nodes() {
        for c in &n.contains {
            parents.entry(c.as_str()).or_default().push(n.name.as_str());
        }
    }
    for n in g.names() {
        let ps = parents.get(n).map(Vec::len).unwrap_or(0);
        if n == ROOT {
            assert_eq!(ps, 0, "root has a parent");
            continue;
        }
        assert_eq!(ps, 1, "{n} has {ps} parents");
        let mut cur = n;
        for _ in 0..=g.len() {
            if cur == ROOT {
                break;
            }
            cur = parents[cur][0];
        }
        assert_eq!(cur, ROOT, "{n} does not reach the root");
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(128))]

    #[test]
    fn forest_holds_after_every_operation(ops in prop::collection::vec(op(), 0..40)) {
        let mut counter = 0;
        let mut g = SceneGraph::new();
        for op in &ops {
            g = step(&g, op, &mut counter);
            assert_forest(&g);
            prop_assert!(g.validate().is_ok());
        }
    }

    #[test]
    fn serialize_round_trip_is_identity(ops in prop::collection::vec(op(), 0..40)) {
        let g = build(&ops);
        let text = g.serialize();
        let back = SceneGraph::deserialize(&text).unwrap();
        prop_assert_eq!(&back, &g);
        prop_assert_eq!(back.serialize(), text);
    }

    #[test]
    fn apply_inverts_diff(
        base in prop::collection::vec(op(), 0..25),
        more in prop::collection::vec(op(), 0..25),
    ) {
        let old = build(&base);
        let mut counter = 1000;
        let new = more.iter().fold(old.clone(), |g, op| step(&g, op, &mut counter));
        let delta = old.diff(&new);
        prop_assert_eq!(old.apply(&delta).unwrap(), new.clone());
        prop_assert!(new.diff(&new).is_empty());
    }
}

#[test]
fn reference_initial_graph_round_trips_byte_for_byte() {
    let text = include_str!("fixtures/iii_a_initial.json");
    let g = SceneGraph::deserialize(text).unwrap();
    let again = g.serialize();
    assert_eq!(again, text);
    // Full printed precision survives.
    assert!(again.contains("0.19957663118839264"));
    assert!(again.contains("-0.6754058599472046"));
    assert!(again.contains("0.1497023242712021"));
    assert_eq!(g.get("small_box").unwrap().coordinates, Some([0.19957663118839264, -0.6754058599472046, 0.1497023242712021]));
}

#[test]
fn diff_between_reference_graphs_moves_items_into_boxes() {
    let a = SceneGraph::deserialize(include_str!("fixtures/iii_a_initial.json")).unwrap();
    let b = SceneGraph::deserialize(include_str!("fixtures/iii_a_final.json")).unwrap();
    let d = a.diff(&b);
    assert!(d.added.is_empty() && d.removed.is_empty());
    let moved: Vec<(&str, &str)> = d.reparented.iter().map(|r| (r.node.as_str(), r.new_parent.as_deref().unwrap_or(""))).collect();
    for (item, box_) in [("orange", "large_box"), ("apple", "large_box"), ("lemon", "large_box"), ("garlic", "small_box"), ("red_onion", "small_box")] {
        assert!(moved.contains(&(item, box_)), "{item} -> {box_} missing from {moved:?}");
    }
    assert_eq!(a.apply(&d).unwrap(), b);
}

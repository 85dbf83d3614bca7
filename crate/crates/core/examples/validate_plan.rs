//! Parse a textual plan and check it against a scene graph.
//!
//! `cargo run --example validate_plan`

use lta::planner::{has_errors, parse_plan, validate_plan};
use lta::scene_graph::SceneGraph;

const PLAN: &str = "\
Put the apple away, then look around with the apple still in hand.
1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple])
2. pick_object(object_name=apple)
3. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[lemon])
4. place_object(place_position_name=large_box)
";

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let graph = SceneGraph::deserialize(include_str!("../tests/fixtures/iii_a_initial.json"))?;
    let plan = parse_plan(PLAN)?;
    println!("rationale: {}", plan.rationale);
    println!("{}", plan.render());

    let found = validate_plan(&plan, &graph);
    for v in &found {
        println!("{:?} {:?} step {}: {}", v.severity, v.rule, v.step, v.message);
    }
    println!("rejected: {}", has_errors(&found));

    // A placeholder may only point back at an earlier step.
    let bad = parse_plan("1. add_object_to_scenegraph(object_name=spot, coordinates=$step2.out)\n");
    println!("forward reference: {}", bad.unwrap_err());
    Ok(())
}

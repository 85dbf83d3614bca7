//! Scan a simulated table: depth capture, segmentation, VLM boxes, and the
//! localized centroids written back into the scene graph.
//!
//! `cargo run --example perception`

use lta::backends::{PlannerSpec, ScriptedPlanner, ScriptedVlm, ToolCall, VlmNoise};
use lta::eval::Scenario;
use lta::orchestrator::Executor;
use lta::scene_graph::{SceneGraph, SceneNode, ROOT};
use lta::tools::{self, ToolMode};
use serde_json::json;

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let sc = Scenario::load(concat!(env!("CARGO_MANIFEST_DIR"), "/scenarios/iii_a.json").as_ref())?;
    let mut world = sc.world.build(7, true, &[])?;

    let cap = world.capture(0)?;
    println!("view 0: {} visible, {}x{} depth", cap.visible.len(), cap.depth.width(), cap.depth.height());

    let names: Vec<String> = sc.world.objects.iter().map(|o| o.name.clone()).collect();
    let mut graph = SceneGraph::new();
    for n in &names {
        graph = graph.add_object(SceneNode::new(n.as_str()), ROOT)?;
    }
    let vlm = ScriptedVlm::new(VlmNoise::default());
    let mut exec = Executor::new(world, graph, ToolMode::Vlm, Box::new(vlm), Box::new(ScriptedPlanner::new(PlannerSpec::Auto)));

    let args = json!({"targets_to_scan": names});
    let (out, _) = exec.execute(&ToolCall::new("scan", tools::SCAN, args.as_object().cloned().unwrap_or_default()));
    println!("scan ok: {}", out.result.ok);
    for n in &names {
        let est = exec.graph.get(n).and_then(|n| n.coordinates);
        let truth = exec.world.visible_surface_centroid(n, exec.perception.voxel, exec.perception.z_epsilon);
        if let (Some(e), Some(t)) = (est, truth) {
            let err = ((e[0] - t[0]).powi(2) + (e[1] - t[1]).powi(2) + (e[2] - t[2]).powi(2)).sqrt();
            println!("{n:<10} [{:+.3} {:+.3} {:+.3}]  error {:.2} mm", e[0], e[1], e[2], err * 1e3);
        }
    }
    Ok(())
}

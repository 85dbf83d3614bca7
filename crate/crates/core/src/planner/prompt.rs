use crate::scene_graph::SceneGraph;
use crate::tools::{self, ToolMode};
use std::fmt::Write as _;

const VLM_RULES: [&str; 7] = [
    "After a pick or place moves an object, its stored coordinates are out of date. Refresh them (scan or edit) before that object is picked again or used as a place target.",
    "Scans are slow. Refresh only objects you will manipulate again.",
    "Keep the scene graph in step with every change you make, but do not rescan objects you are finished with.",
    "Never call get_a_specific_coordinate_point_using_vlm (or any other camera tool) between pick_object and the following place_object: the held object blocks the camera.",
    "When an argument depends on an earlier step's result, write it as $stepK.out, optionally followed by .field path segments.",
    "Use the vision model for looking only. Reasoning, selection and world knowledge are your job.",
    "Put every visible object you need into one scan_and_update_coordinates_in_scene_graph call instead of scanning them one at a time.",
];

const TAG_RULES: [&str; 6] = [
    "After a pick or place moves an object, its stored coordinates are out of date. Refresh them before that object is picked again or used as a place target.",
    "Never call get_current_position_of_visible_apriltags while holding an object; read tags only after placing.",
    "After reading tags, copy the positions you need into the scene graph with edit_scenegraph so that pick and place can use them.",
    "When an argument depends on an earlier step's result, write it as $stepK.out, optionally followed by .field path segments.",
    "Only unobstructed tags are reported. Do not expect covered objects to be found.",
    "For place_object, name the object that will end up directly underneath the held object; name a base only when placing directly on it.",
];

const OUTPUT_FORMAT: &str = "Answer with numbered steps, one tool call per line, for example:\n\
1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple, yarn])\n\
2. pick_object(object_name=apple)  # optional comment\n\
Strings containing spaces must be double-quoted. Lines that are not numbered steps are treated as commentary.";

pub fn planning_rules(mode: ToolMode) -> &'static [&'static str] {
    match mode {
        ToolMode::Vlm => &VLM_RULES,
        ToolMode::Apriltag => &TAG_RULES,
    }
}

/// Deterministic planning prompt for the planner model.
pub fn build_planning_request(user_request: &str, graph: &SceneGraph, mode: ToolMode) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "You control a single-arm robot at a table. Produce the complete sequence of tool calls that carries out this request:");
    let _ = writeln!(out, "{user_request}");
    let _ = writeln!(out, "\nRules:");
    for (i, rule) in planning_rules(mode).iter().enumerate() {
        let _ = writeln!(out, "{}) {rule}", i + 1);
    }
    let _ = writeln!(out, "\nTools:");
    for t in tools::registry(mode) {
        let _ = writeln!(out, "{}", t.render());
    }
    let _ = writeln!(out, "\nCurrent scene graph:");
    let _ = writeln!(out, "{}", graph.render_for_prompt());
    let _ = writeln!(out, "\n{OUTPUT_FORMAT}");
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_and_complete() {
        let g = SceneGraph::new();
        let a = build_planning_request("Organize the table", &g, ToolMode::Vlm);
        assert_eq!(a, build_planning_request("Organize the table", &g, ToolMode::Vlm));
        assert!(a.contains("Organize the table"));
        assert!(a.contains("7) "));
        assert!(a.contains(&g.render_for_prompt()));
        let t = build_planning_request("x", &g, ToolMode::Apriltag);
        assert!(t.contains("6) ") && !t.contains("7) "));
        assert!(t.contains(tools::APRILTAGS));
    }
}

use super::plan::{ArgValue, Plan};
use crate::scene_graph::{Attribute, SceneGraph};
use crate::tools::{self, ToolDef, ToolMode};
use serde::{Deserialize, Serialize};
use std::collections::{BTreeSet, HashMap};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RuleId {
    /// Unknown tool, unknown or missing argument, or wrongly typed literal.
    R0,
    /// Camera use between a pick and its place.
    R1,
    /// Gripper discipline: pick while holding, place while empty.
    R2,
    /// Pick/place target without current coordinates.
    R3,
    /// Adjacent single-target scans that could be one call (advisory).
    R4,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Severity {
    Error,
    Warning,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RuleViolation {
    pub rule: RuleId,
    /// 1-based step number.
    pub step: usize,
    pub severity: Severity,
    pub message: String,
}

impl RuleViolation {
    pub fn is_error(&self) -> bool {
        self.severity == Severity::Error
    }
}

/// Validates against the union of both tool modes.
pub fn validate_plan(plan: &Plan, graph: &SceneGraph) -> Vec<RuleViolation> {
    let mut catalog = tools::registry(ToolMode::Vlm);
    catalog.extend(tools::registry(ToolMode::Apriltag).into_iter().filter(|t| t.name == tools::APRILTAGS));
    check(plan, graph, &catalog)
}

pub fn validate_plan_for(plan: &Plan, graph: &SceneGraph, mode: ToolMode) -> Vec<RuleViolation> {
    check(plan, graph, &tools::registry(mode))
}

pub fn has_errors(violations: &[RuleViolation]) -> bool {
    violations.iter().any(RuleViolation::is_error)
}

fn literal_ok(def: &ToolDef, name: &str, v: &ArgValue) -> bool {
    let Some(p) = def.param(name) else {
        return false;
    };
    if !v.placeholders().is_empty() {
        return true;
    }
    p.ty.accepts(&v.to_json())
}

fn check(plan: &Plan, graph: &SceneGraph, catalog: &[ToolDef]) -> Vec<RuleViolation> {
    let mut out = Vec::new();
    let mut push = |rule, step, severity, message: String| out.push(RuleViolation { rule, step, severity, message });

    // Node name -> has usable (fresh) coordinates.
    let mut fresh: HashMap<String, bool> = graph.nodes().map(|n| (n.name.clone(), n.coordinates.is_some())).collect();
    let mut holding: Option<String> = None;

    for (i, step) in plan.steps.iter().enumerate() {
        let n = i + 1;
        let Some(def) = catalog.iter().find(|d| d.name == step.tool) else {
            push(RuleId::R0, n, Severity::Error, format!("unknown tool '{}'", step.tool));
            continue;
        };
        for (name, v) in &step.args {
            if def.param(name).is_none() {
                push(RuleId::R0, n, Severity::Error, format!("{} has no parameter '{name}'", def.name));
            } else if !literal_ok(def, name, v) {
                push(RuleId::R0, n, Severity::Error, format!("'{name}' has the wrong type for {}", def.name));
            }
        }
        for p in def.params.iter().filter(|p| p.required) {
            if !step.args.contains_key(p.name) {
                push(RuleId::R0, n, Severity::Error, format!("{} is missing '{}'", def.name, p.name));
            }
        }

        let tool = step.tool.as_str();
        if tools::is_perception(tool) {
            if let Some(h) = &holding {
                push(RuleId::R1, n, Severity::Error, format!("{tool} while holding {h}; the camera view is blocked"));
            }
        }
        match tool {
            tools::PICK => {
                let target = step.text_arg("object_name").unwrap_or_default().to_string();
                if let Some(h) = &holding {
                    push(RuleId::R2, n, Severity::Error, format!("pick of {target} while still holding {h}"));
                }
                match fresh.get(&target) {
                    None => push(RuleId::R3, n, Severity::Error, format!("{target} is not in the scene graph")),
                    Some(false) => push(RuleId::R3, n, Severity::Error, format!("{target} has no current coordinates")),
                    Some(true) => {}
                }
                // Once moved, the stored position is the old one.
                fresh.insert(target.clone(), false);
                holding = Some(target);
            }
            tools::PLACE => {
                let target = step.text_arg("place_position_name").unwrap_or_default().to_string();
                if holding.is_none() {
                    push(RuleId::R2, n, Severity::Error, format!("place at {target} with an empty gripper"));
                }
                match fresh.get(&target) {
                    None => push(RuleId::R3, n, Severity::Error, format!("{target} is not in the scene graph")),
                    Some(false) => push(RuleId::R3, n, Severity::Error, format!("{target} has no current coordinates")),
                    Some(true) => {}
                }
                holding = None;
            }
            tools::SCAN => {
                if let Some(ArgValue::List(items)) = step.args.get("targets_to_scan") {
                    for t in items.iter().filter_map(ArgValue::as_text) {
                        if let Some(f) = fresh.get_mut(t) {
                            *f = true;
                        }
                    }
                    if items.len() == 1 && n > 1 {
                        let prev = &plan.steps[n - 2];
                        let prev_single = prev.tool == tools::SCAN
                            && matches!(prev.args.get("targets_to_scan"), Some(ArgValue::List(p)) if p.len() == 1);
                        if prev_single {
                            push(RuleId::R4, n, Severity::Warning, "adjacent single-object scans could be one call".into());
                        }
                    }
                }
            }
            tools::ADD => {
                if let Some(name) = step.text_arg("object_name") {
                    let has = step.args.get("coordinates").is_some_and(|c| match c {
                        ArgValue::Null => false,
                        ArgValue::List(l) => !l.is_empty(),
                        _ => true,
                    });
                    fresh.insert(name.to_string(), has);
                }
            }
            tools::EDIT => {
                let node = step.text_arg("node_name").unwrap_or_default();
                let attr = step.text_arg("attribute_name").and_then(|a| a.parse::<Attribute>().ok());
                if attr == Some(Attribute::Coordinates) {
                    let has = match step.args.get("value") {
                        None | Some(ArgValue::Null) => false,
                        Some(ArgValue::List(l)) => !l.is_empty(),
                        Some(_) => true,
                    };
                    if let Some(f) = fresh.get_mut(node) {
                        *f = has;
                    }
                }
            }
            _ => {}
        }
    }
    out
}

/// Rule ids with at least one error, for compact reporting.
pub fn error_rules(violations: &[RuleViolation]) -> BTreeSet<RuleId> {
    violations.iter().filter(|v| v.is_error()).map(|v| v.rule).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::planner::parse_plan;
    use crate::scene_graph::{SceneNode, ROOT};

    fn graph() -> SceneGraph {
        SceneGraph::new()
            .add_object(SceneNode::new("table"), ROOT)
            .unwrap()
            .add_object(SceneNode::new("apple").with_coordinates([0.1, -0.5, 0.03]), "table")
            .unwrap()
            .add_object(SceneNode::new("box").with_coordinates([0.3, -0.5, 0.05]), "table")
            .unwrap()
    }

    fn rules(text: &str) -> Vec<RuleId> {
        validate_plan(&parse_plan(text).unwrap(), &graph()).iter().map(|v| v.rule).collect()
    }

    #[test]
    fn clean_plan() {
        assert!(rules("1. pick_object(object_name=apple)\n2. place_object(place_position_name=box)").is_empty());
    }

    #[test]
    fn point_between_pick_and_place() {
        let v = validate_plan(
            &parse_plan("1. pick_object(object_name=apple)\n2. get_a_specific_coordinate_point_using_vlm(prompt_to_vlm=\"free spot\")\n3. place_object(place_position_name=box)").unwrap(),
            &graph(),
        );
        assert_eq!(v.len(), 1);
        assert_eq!((v[0].rule, v[0].step), (RuleId::R1, 2));
    }

    #[test]
    fn double_pick() {
        assert!(rules("1. pick_object(object_name=apple)\n2. pick_object(object_name=box)").contains(&RuleId::R2));
    }

    #[test]
    fn stale_target() {
        let text = "1. pick_object(object_name=apple)\n2. place_object(place_position_name=box)\n3. pick_object(object_name=apple)";
        assert_eq!(rules(text), vec![RuleId::R3]);
        let text = "1. pick_object(object_name=apple)\n2. place_object(place_position_name=box)\n3. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple])\n4. pick_object(object_name=apple)";
        assert!(rules(text).is_empty());
    }

    #[test]
    fn adjacent_scans_warn() {
        let text = "1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[apple])\n2. scan_and_update_coordinates_in_scene_graph(targets_to_scan=[box])";
        let v = validate_plan(&parse_plan(text).unwrap(), &graph());
        assert_eq!(v.len(), 1);
        assert_eq!(v[0].rule, RuleId::R4);
        assert!(!has_errors(&v));
    }

    #[test]
    fn schema() {
        assert_eq!(rules("1. fly(to=moon)"), vec![RuleId::R0]);
        assert_eq!(rules("1. pick_object(name=apple)"), vec![RuleId::R0, RuleId::R0, RuleId::R3]);
        assert_eq!(rules("1. scan_and_update_coordinates_in_scene_graph(targets_to_scan=apple)"), vec![RuleId::R0]);
    }
}

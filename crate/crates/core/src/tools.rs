//! The robot's tool catalog: names, parameter schemas and descriptions, as
//! exposed to chat models and checked by the plan validator.

use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

pub const PICK: &str = "pick_object";
pub const PLACE: &str = "place_object";
pub const VQA: &str = "ask_vqa_vlm";
pub const SCAN: &str = "scan_and_update_coordinates_in_scene_graph";
pub const POINT: &str = "get_a_specific_coordinate_point_using_vlm";
pub const ADD: &str = "add_object_to_scenegraph";
pub const EDIT: &str = "edit_scenegraph";
pub const PLAN: &str = "plan_using_advanced_llm";
pub const APRILTAGS: &str = "get_current_position_of_visible_apriltags";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ToolMode {
    /// Perception through the vision-language model.
    #[default]
    Vlm,
    /// Perception through fiducial tags only.
    Apriltag,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ParamType {
    Text,
    TextList,
    /// Three numbers or null.
    Coordinates,
    Boolean,
    /// Anything an attribute can hold.
    Any,
}

impl ParamType {
    pub fn accepts(&self, v: &Value) -> bool {
        match self {
            ParamType::Text => v.is_string(),
            ParamType::TextList => v.as_array().is_some_and(|a| a.iter().all(Value::is_string)),
            ParamType::Coordinates => {
                v.is_null() || v.as_array().is_some_and(|a| a.is_empty() || (a.len() == 3 && a.iter().all(Value::is_number)))
            }
            ParamType::Boolean => v.is_boolean(),
            ParamType::Any => true,
        }
    }

    fn json_schema(&self) -> Value {
        match self {
            ParamType::Text => json!({"type": "string"}),
            ParamType::TextList => json!({"type": "array", "items": {"type": "string"}}),
            ParamType::Coordinates => json!({"type": ["array", "null"], "items": {"type": "number"}}),
            ParamType::Boolean => json!({"type": "boolean"}),
            ParamType::Any => json!({}),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ParamDef {
    pub name: &'static str,
    pub ty: ParamType,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ToolDef {
    pub name: &'static str,
    pub description: &'static str,
    pub params: Vec<ParamDef>,
}

impl ToolDef {
    pub fn param(&self, name: &str) -> Option<&ParamDef> {
        self.params.iter().find(|p| p.name == name)
    }

    /// Function declaration in the common chat-completion shape.
    pub fn to_function_json(&self) -> Value {
        let props: serde_json::Map<String, Value> =
            self.params.iter().map(|p| (p.name.to_string(), p.ty.json_schema())).collect();
        let required: Vec<&str> = self.params.iter().filter(|p| p.required).map(|p| p.name).collect();
        json!({
            "type": "function",
            "function": {
                "name": self.name,
                "description": self.description,
                "parameters": {"type": "object", "properties": props, "required": required},
            }
        })
    }

    /// One-line signature plus description, for planning prompts.
    pub fn render(&self) -> String {
        let params: Vec<String> = self
            .params
            .iter()
            .map(|p| if p.required { p.name.to_string() } else { format!("{}?", p.name) })
            .collect();
        format!("- {}({}): {}", self.name, params.join(", "), self.description)
    }
}

const fn req(name: &'static str, ty: ParamType) -> ParamDef {
    ParamDef { name, ty, required: true }
}

const fn opt(name: &'static str, ty: ParamType) -> ParamDef {
    ParamDef { name, ty, required: false }
}

fn all_tools() -> Vec<ToolDef> {
    use ParamType::*;
    vec![
        ToolDef {
            name: PICK,
            description: "Grasp the named object at the coordinates stored for it in the scene graph. The name must be an existing node with current coordinates.",
            params: vec![req("object_name", Text)],
        },
        ToolDef {
            name: PLACE,
            description: "Put the held object down at the coordinates stored for the named node. The name must be an existing node with coordinates.",
            params: vec![req("place_position_name", Text)],
        },
        ToolDef {
            name: VQA,
            description: "Ask the vision model one standalone question about the current top view. It keeps no conversation history.",
            params: vec![req("query_to_vlm", Text)],
        },
        ToolDef {
            name: SCAN,
            description: "Locate the listed objects from several camera vantage points and write their coordinates into the scene graph. Needs an empty gripper; hidden objects cannot be found. Batch all visible targets into one call.",
            params: vec![req("targets_to_scan", TextList)],
        },
        ToolDef {
            name: POINT,
            description: "Ask the vision model for one point in the top view (for example a spot between two objects) and get it back as [x, y, z]. The scene graph is not changed; store the point yourself. Needs an empty gripper. Keep the prompt short.",
            params: vec![req("prompt_to_vlm", Text)],
        },
        ToolDef {
            name: ADD,
            description: "Insert a new node into the scene graph under the table.",
            params: vec![
                req("object_name", Text),
                opt("affordance", TextList),
                opt("position_in_cartesian_space", Text),
                opt("things_to_know", Text),
                opt("coordinates", Coordinates),
                opt("contains", TextList),
            ],
        },
        ToolDef {
            name: EDIT,
            description: "Replace one attribute of an existing scene-graph node.",
            params: vec![req("node_name", Text), req("attribute_name", Text), req("value", Any)],
        },
        ToolDef {
            name: PLAN,
            description: "Hand the user's request to the planning model and receive a numbered tool-call plan to follow.",
            params: vec![req("request_from_user", Text)],
        },
        ToolDef {
            name: APRILTAGS,
            description: "Report the id and [x, y, z] of every AprilTag visible from the top view. Covered objects are not reported. Needs an empty gripper.",
            params: vec![opt("trigger", Boolean)],
        },
    ]
}

/// Tools available in `mode`, in catalog order.
pub fn registry(mode: ToolMode) -> Vec<ToolDef> {
    all_tools()
        .into_iter()
        .filter(|t| match mode {
            ToolMode::Vlm => t.name != APRILTAGS,
            ToolMode::Apriltag => t.name != SCAN && t.name != POINT,
        })
        .collect()
}

pub fn is_motion(tool: &str) -> bool {
    tool == PICK || tool == PLACE
}

/// Tools that need the camera (and therefore an empty gripper).
pub fn is_perception(tool: &str) -> bool {
    matches!(tool, SCAN | POINT | VQA | APRILTAGS)
}

pub fn is_graph_edit(tool: &str) -> bool {
    tool == ADD || tool == EDIT
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn modes() {
        let vlm: Vec<_> = registry(ToolMode::Vlm).iter().map(|t| t.name).collect();
        assert_eq!(vlm.len(), 8);
        assert!(!vlm.contains(&APRILTAGS));
        let tags: Vec<_> = registry(ToolMode::Apriltag).iter().map(|t| t.name).collect();
        assert!(tags.contains(&APRILTAGS) && !tags.contains(&SCAN) && !tags.contains(&POINT));
    }

    #[test]
    fn param_types() {
        assert!(ParamType::Coordinates.accepts(&json!([0.1, 0.2, 0.3])));
        assert!(ParamType::Coordinates.accepts(&Value::Null));
        assert!(!ParamType::Coordinates.accepts(&json!([0.1, 0.2])));
        assert!(!ParamType::TextList.accepts(&json!(["a", 1])));
    }
}

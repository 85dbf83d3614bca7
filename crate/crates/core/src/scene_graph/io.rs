//! JSON file format for scene graphs.

use super::{check_coordinates, GraphError, Result, SceneGraph, SceneNode};
use indexmap::IndexMap;
use serde_json::{Map, Value};

const FIELDS: [&str; 5] = [
    "affordance",
    "contains",
    "position_in_cartesian_space",
    "things_to_know",
    "coordinates",
];

impl SceneGraph {
    pub fn to_json(&self) -> Value {
        let mut root = Map::new();
        for node in self.nodes() {
            let mut obj = Map::new();
            obj.insert("affordance".into(), Value::from(node.affordance.clone()));
            obj.insert("contains".into(), Value::from(node.contains.clone()));
            obj.insert(
                "position_in_cartesian_space".into(),
                Value::from(node.position_descriptor.clone()),
            );
            obj.insert("things_to_know".into(), Value::from(node.things_to_know.clone()));
            let coords = match node.coordinates {
                Some(c) => Value::from(c.to_vec()),
                None => Value::Array(vec![]),
            };
            obj.insert("coordinates".into(), coords);
            root.insert(node.name.clone(), Value::Object(obj));
        }
        Value::Object(root)
    }

    /// Pretty JSON with two-space indentation; coordinates are printed with
    /// the shortest decimal that round-trips the stored `f64`.
    pub fn serialize(&self) -> String {
        serde_json::to_string_pretty(&self.to_json()).expect("graph JSON is always serializable")
    }

    pub fn deserialize(text: &str) -> Result<SceneGraph> {
        let value: Value = serde_json::from_str(text).map_err(|e| GraphError::Parse {
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_json(&value)
    }

    pub fn from_json(value: &Value) -> Result<SceneGraph> {
        let root = value.as_object().ok_or_else(|| GraphError::Schema {
            field: "<root>".into(),
            message: "expected an object keyed by node name".into(),
        })?;
        let mut nodes = IndexMap::with_capacity(root.len());
        for (name, body) in root {
            let node = parse_node(name, body)?;
            nodes.insert(name.clone(), node);
        }
        let graph = SceneGraph::from_nodes_unchecked(nodes);
        graph.validate()?;
        Ok(graph)
    }
}

fn schema(field: &str, node: &str, message: &str) -> GraphError {
    GraphError::Schema {
        field: field.to_string(),
        message: format!("node '{node}': {message}"),
    }
}

fn string_list(field: &str, node: &str, v: &Value) -> Result<Vec<String>> {
    let items = v
        .as_array()
        .ok_or_else(|| schema(field, node, "expected a list of strings"))?;
    items
        .iter()
        .map(|i| {
            i.as_str()
                .map(str::to_string)
                .ok_or_else(|| schema(field, node, "expected a list of strings"))
        })
        .collect()
}

fn parse_node(name: &str, body: &Value) -> Result<SceneNode> {
    let obj = body
        .as_object()
        .ok_or_else(|| schema(name, name, "node body must be an object"))?;
    for key in obj.keys() {
        if !FIELDS.contains(&key.as_str()) {
            return Err(schema(key, name, "unexpected field"));
        }
    }
    let field = |f: &str| obj.get(f).ok_or_else(|| schema(f, name, "missing required field"));

    let affordance = string_list("affordance", name, field("affordance")?)?;
    let contains = match field("contains")? {
        Value::Null => Vec::new(),
        v => string_list("contains", name, v)?,
    };
    let position_descriptor = field("position_in_cartesian_space")?
        .as_str()
        .ok_or_else(|| schema("position_in_cartesian_space", name, "expected a string"))?
        .to_string();
    let things_to_know = field("things_to_know")?
        .as_str()
        .ok_or_else(|| schema("things_to_know", name, "expected a string"))?
        .to_string();
    let coordinates = match field("coordinates")? {
        Value::Null => None,
        Value::Array(items) if items.is_empty() => None,
        Value::Array(items) if items.len() == 3 => {
            let mut xyz = [0.0; 3];
            for (slot, item) in xyz.iter_mut().zip(items) {
                *slot = item
                    .as_f64()
                    .ok_or_else(|| schema("coordinates", name, "expected numbers"))?;
            }
            Some(xyz)
        }
        _ => {
            return Err(schema(
                "coordinates",
                name,
                "expected an empty list or exactly three numbers",
            ))
        }
    };
    check_coordinates(name, coordinates)?;
    Ok(SceneNode {
        name: name.to_string(),
        affordance,
        contains,
        position_descriptor,
        things_to_know,
        coordinates,
    })
}

//! Scene graph knowledge base.
//!
//! A rooted containment hierarchy of workspace entities. Every node carries
//! free-text affordances, an ordered `contains` list, a position descriptor,
//! domain notes and optional base-frame coordinates. Graph values are
//! immutable snapshots: every mutation returns a new graph and leaves the
//! receiver untouched.
//!
//! The on-disk and on-prompt form is a JSON object keyed by node name (see
//! [`SceneGraph::serialize`]). Child order inside `contains` is significant.

mod diff;
mod io;

use indexmap::IndexMap;
use serde::Serialize;
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

pub use diff::{AttributeChange, GraphDelta, Reparent};

/// Name of the root node. It always exists and can never be removed.
pub const ROOT: &str = "workspace";

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GraphError {
    #[error("node '{0}' already exists")]
    DuplicateName(String),
    #[error("unknown parent '{0}'")]
    UnknownParent(String),
    #[error("unknown node '{0}'")]
    UnknownNode(String),
    #[error("invalid node name '{0}' (expected snake_case identifier)")]
    InvalidName(String),
    #[error("attribute '{attribute}' expects {expected}")]
    TypeMismatch { attribute: String, expected: String },
    #[error("placing '{child}' under '{node}' would create a containment cycle")]
    WouldCreateCycle { node: String, child: String },
    #[error("non-finite coordinate value for '{0}'")]
    NonFiniteValue(String),
    #[error("the root node '{ROOT}' cannot be removed")]
    RootDeletion,
    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("schema error in field '{field}': {message}")]
    Schema { field: String, message: String },
    #[error("invalid graph: {0}")]
    Invariant(String),
    #[error("delta does not apply: {0}")]
    DeltaMismatch(String),
}

pub type Result<T> = std::result::Result<T, GraphError>;

/// One entity of the workspace.
#[derive(Debug, Clone, PartialEq)]
pub struct SceneNode {
    pub name: String,
    pub affordance: Vec<String>,
    pub contains: Vec<String>,
    /// Serialized as `position_in_cartesian_space`.
    pub position_descriptor: String,
    pub things_to_know: String,
    pub coordinates: Option<[f64; 3]>,
}

impl SceneNode {
    pub fn new(name: impl Into<String>) -> Self {
        Self {
            name: name.into(),
            affordance: Vec::new(),
            contains: Vec::new(),
            position_descriptor: String::new(),
            things_to_know: String::new(),
            coordinates: None,
        }
    }

    pub fn with_affordance<I, S>(mut self, tags: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.affordance = tags.into_iter().map(Into::into).collect();
        self
    }

    pub fn with_position(mut self, descriptor: impl Into<String>) -> Self {
        self.position_descriptor = descriptor.into();
        self
    }

    pub fn with_things_to_know(mut self, text: impl Into<String>) -> Self {
        self.things_to_know = text.into();
        self
    }

    pub fn with_coordinates(mut self, xyz: [f64; 3]) -> Self {
        self.coordinates = Some(xyz);
        self
    }

    pub fn with_contains<I, S>(mut self, children: I) -> Self
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        self.contains = children.into_iter().map(Into::into).collect();
        self
    }

    pub fn get(&self, attribute: Attribute) -> AttributeValue {
        match attribute {
            Attribute::Affordance => AttributeValue::List(self.affordance.clone()),
            Attribute::Contains => AttributeValue::List(self.contains.clone()),
            Attribute::PositionDescriptor => AttributeValue::Text(self.position_descriptor.clone()),
            Attribute::ThingsToKnow => AttributeValue::Text(self.things_to_know.clone()),
            Attribute::Coordinates => AttributeValue::Coordinates(self.coordinates),
        }
    }

    fn set_unchecked(&mut self, attribute: Attribute, value: AttributeValue) -> Result<()> {
        match (attribute, value) {
            (Attribute::Affordance, AttributeValue::List(v)) => self.affordance = v,
            (Attribute::Contains, AttributeValue::List(v)) => self.contains = v,
            (Attribute::PositionDescriptor, AttributeValue::Text(t)) => self.position_descriptor = t,
            (Attribute::ThingsToKnow, AttributeValue::Text(t)) => self.things_to_know = t,
            (Attribute::Coordinates, AttributeValue::Coordinates(c)) => self.coordinates = c,
            (attribute, _) => {
                return Err(GraphError::TypeMismatch {
                    attribute: attribute.to_string(),
                    expected: attribute.expected().into(),
                })
            }
        }
        Ok(())
    }
}

/// The five editable node attributes.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Attribute {
    Affordance,
    Contains,
    #[serde(rename = "position_in_cartesian_space")]
    PositionDescriptor,
    ThingsToKnow,
    Coordinates,
}

impl Attribute {
    pub const ALL: [Attribute; 5] = [
        Attribute::Affordance,
        Attribute::Contains,
        Attribute::PositionDescriptor,
        Attribute::ThingsToKnow,
        Attribute::Coordinates,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Attribute::Affordance => "affordance",
            Attribute::Contains => "contains",
            Attribute::PositionDescriptor => "position_in_cartesian_space",
            Attribute::ThingsToKnow => "things_to_know",
            Attribute::Coordinates => "coordinates",
        }
    }

    fn expected(self) -> &'static str {
        match self {
            Attribute::Affordance | Attribute::Contains => "a list of strings",
            Attribute::PositionDescriptor | Attribute::ThingsToKnow => "a string",
            Attribute::Coordinates => "an empty list or three finite numbers",
        }
    }
}

impl fmt::Display for Attribute {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Attribute {
    type Err = GraphError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "affordance" => Ok(Attribute::Affordance),
            "contains" => Ok(Attribute::Contains),
            "position_in_cartesian_space" | "position_descriptor" => {
                Ok(Attribute::PositionDescriptor)
            }
            "things_to_know" => Ok(Attribute::ThingsToKnow),
            "coordinates" => Ok(Attribute::Coordinates),
            other => Err(GraphError::Schema {
                field: other.to_string(),
                message: "unknown attribute".into(),
            }),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(untagged)]
pub enum AttributeValue {
    List(Vec<String>),
    Text(String),
    Coordinates(Option<[f64; 3]>),
}

impl AttributeValue {
    pub fn to_json(&self) -> serde_json::Value {
        match self {
            AttributeValue::List(v) => serde_json::json!(v),
            AttributeValue::Text(t) => serde_json::json!(t),
            AttributeValue::Coordinates(None) => serde_json::json!([]),
            AttributeValue::Coordinates(Some(c)) => serde_json::json!(c),
        }
    }

    /// Type-checks a JSON value against `attribute`. A `null` containment
    /// list is normalized to an empty list.
    pub fn from_json(attribute: Attribute, value: &serde_json::Value) -> Result<Self> {
        use serde_json::Value;
        let mismatch = || GraphError::TypeMismatch {
            attribute: attribute.to_string(),
            expected: attribute.expected().into(),
        };
        match attribute {
            Attribute::Affordance | Attribute::Contains => match value {
                Value::Null if attribute == Attribute::Contains => Ok(AttributeValue::List(vec![])),
                Value::Array(items) => items
                    .iter()
                    .map(|v| v.as_str().map(str::to_string).ok_or_else(mismatch))
                    .collect::<Result<Vec<_>>>()
                    .map(AttributeValue::List),
                _ => Err(mismatch()),
            },
            Attribute::PositionDescriptor | Attribute::ThingsToKnow => value
                .as_str()
                .map(|s| AttributeValue::Text(s.to_string()))
                .ok_or_else(mismatch),
            Attribute::Coordinates => match value {
                Value::Null => Ok(AttributeValue::Coordinates(None)),
                Value::Array(items) if items.is_empty() => Ok(AttributeValue::Coordinates(None)),
                Value::Array(items) if items.len() == 3 => {
                    let mut xyz = [0.0; 3];
                    for (slot, item) in xyz.iter_mut().zip(items) {
                        *slot = item.as_f64().ok_or_else(mismatch)?;
                    }
                    Ok(AttributeValue::Coordinates(Some(xyz)))
                }
                _ => Err(mismatch()),
            },
        }
    }
}

/// Snake-case identifier check used for node names.
pub fn is_valid_name(name: &str) -> bool {
    !name.is_empty()
        && name
            .chars()
            .all(|c| c.is_ascii_lowercase() || c.is_ascii_digit() || c == '_')
        && !name.starts_with(|c: char| c.is_ascii_digit())
}

#[derive(Debug, Clone)]
pub struct SceneGraph {
    nodes: IndexMap<String, SceneNode>,
}

impl PartialEq for SceneGraph {
    // Node-set equality; insertion order of the map is not significant, child
    // order inside `contains` is.
    fn eq(&self, other: &Self) -> bool {
        self.nodes.len() == other.nodes.len()
            && self
                .nodes
                .iter()
                .all(|(k, v)| other.nodes.get(k).is_some_and(|o| o == v))
    }
}

impl Default for SceneGraph {
    fn default() -> Self {
        Self::new()
    }
}

impl SceneGraph {
    /// A graph holding only the root node.
    pub fn new() -> Self {
        let mut nodes = IndexMap::new();
        nodes.insert(
            ROOT.to_string(),
            SceneNode::new(ROOT)
                .with_affordance(["None"])
                .with_position("irrelevant")
                .with_things_to_know("None"),
        );
        Self { nodes }
    }

    pub fn get(&self, name: &str) -> Option<&SceneNode> {
        self.nodes.get(name)
    }

    pub fn contains_node(&self, name: &str) -> bool {
        self.nodes.contains_key(name)
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn nodes(&self) -> impl Iterator<Item = &SceneNode> {
        self.nodes.values()
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.nodes.keys().map(String::as_str)
    }

    pub fn parent_of(&self, name: &str) -> Option<&str> {
        self.nodes
            .values()
            .find(|n| n.contains.iter().any(|c| c == name))
            .map(|n| n.name.as_str())
    }

    /// Parent chain from `name` upwards, excluding `name` itself.
    pub fn ancestors(&self, name: &str) -> Vec<&str> {
        let mut out = Vec::new();
        let mut cur = name;
        while let Some(p) = self.parent_of(cur) {
            if out.contains(&p) || p == name {
                break;
            }
            out.push(p);
            cur = p;
        }
        out
    }

    pub fn is_ancestor(&self, candidate: &str, of: &str) -> bool {
        self.ancestors(of).contains(&candidate)
    }

    /// Inserts `node` under `parent`. The node is appended to the end of the
    /// parent's `contains` list. Any names listed in `node.contains` are
    /// reparented under the new node.
    pub fn add_object(&self, node: SceneNode, parent: &str) -> Result<SceneGraph> {
        if !is_valid_name(&node.name) {
            return Err(GraphError::InvalidName(node.name));
        }
        if self.nodes.contains_key(&node.name) {
            return Err(GraphError::DuplicateName(node.name));
        }
        if !self.nodes.contains_key(parent) {
            return Err(GraphError::UnknownParent(parent.to_string()));
        }
        check_coordinates(&node.name, node.coordinates)?;
        let mut node = node;
        let children = std::mem::take(&mut node.contains);
        let name = node.name.clone();
        let mut next = self.clone();
        next.nodes.insert(name.clone(), node);
        next.nodes
            .get_mut(parent)
            .expect("parent checked above")
            .contains
            .push(name.clone());
        if !children.is_empty() {
            next = next.edit_attribute(&name, Attribute::Contains, AttributeValue::List(children))?;
        }
        Ok(next)
    }

    /// Replaces one attribute of `node`. Editing `contains` detaches every
    /// listed child from its previous parent in the same step.
    pub fn edit_attribute(
        &self,
        node: &str,
        attribute: Attribute,
        value: AttributeValue,
    ) -> Result<SceneGraph> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::UnknownNode(node.to_string()));
        }
        let mut next = self.clone();
        match (attribute, value) {
            (Attribute::Contains, AttributeValue::List(children)) => {
                for (i, child) in children.iter().enumerate() {
                    if !self.nodes.contains_key(child) {
                        return Err(GraphError::UnknownNode(child.clone()));
                    }
                    if children[..i].contains(child) {
                        return Err(GraphError::TypeMismatch {
                            attribute: attribute.to_string(),
                            expected: "a list without duplicates".into(),
                        });
                    }
                    if child == node || child == ROOT || self.is_ancestor(child, node) {
                        return Err(GraphError::WouldCreateCycle {
                            node: node.to_string(),
                            child: child.clone(),
                        });
                    }
                }
                for child in &children {
                    for other in next.nodes.values_mut() {
                        if other.name != node {
                            other.contains.retain(|c| c != child);
                        }
                    }
                }
                next.nodes.get_mut(node).expect("checked").contains = children;
            }
            (Attribute::Coordinates, AttributeValue::Coordinates(c)) => {
                check_coordinates(node, c)?;
                next.nodes.get_mut(node).expect("checked").coordinates = c;
            }
            (attribute, value) => {
                next.nodes
                    .get_mut(node)
                    .expect("checked")
                    .set_unchecked(attribute, value)?;
            }
        }
        Ok(next)
    }

    /// JSON-valued variant of [`edit_attribute`](Self::edit_attribute), as
    /// used by the graph editing tool.
    pub fn edit_attribute_json(
        &self,
        node: &str,
        attribute: &str,
        value: &serde_json::Value,
    ) -> Result<SceneGraph> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::UnknownNode(node.to_string()));
        }
        let attribute: Attribute = attribute.parse()?;
        let value = AttributeValue::from_json(attribute, value)?;
        self.edit_attribute(node, attribute, value)
    }

    pub fn set_coordinates(&self, node: &str, xyz: [f64; 3]) -> Result<SceneGraph> {
        if !self.nodes.contains_key(node) {
            return Err(GraphError::UnknownNode(node.to_string()));
        }
        self.edit_attribute(node, Attribute::Coordinates, AttributeValue::Coordinates(Some(xyz)))
    }

    /// Removes a node. Its children become parentless. Not reachable through
    /// any tool; used by test harnesses.
    pub fn remove_node(&self, name: &str) -> Result<SceneGraph> {
        if name == ROOT {
            return Err(GraphError::RootDeletion);
        }
        if !self.nodes.contains_key(name) {
            return Err(GraphError::UnknownNode(name.to_string()));
        }
        let mut next = self.clone();
        next.nodes.shift_remove(name);
        for n in next.nodes.values_mut() {
            n.contains.retain(|c| c != name);
        }
        Ok(next)
    }

    /// Checks every structural invariant.
    pub fn validate(&self) -> Result<()> {
        if !self.nodes.contains_key(ROOT) {
            return Err(GraphError::Invariant(format!("root '{ROOT}' is missing")));
        }
        let mut parent: IndexMap<&str, &str> = IndexMap::new();
        for (key, node) in &self.nodes {
            if key != &node.name {
                return Err(GraphError::Invariant(format!(
                    "node keyed '{key}' is named '{}'",
                    node.name
                )));
            }
            if !is_valid_name(key) {
                return Err(GraphError::InvalidName(key.clone()));
            }
            check_coordinates(key, node.coordinates)?;
            for child in &node.contains {
                if !self.nodes.contains_key(child) {
                    return Err(GraphError::Invariant(format!(
                        "'{key}' contains unknown node '{child}'"
                    )));
                }
                if child == ROOT {
                    return Err(GraphError::WouldCreateCycle {
                        node: key.clone(),
                        child: child.clone(),
                    });
                }
                if let Some(prev) = parent.insert(child.as_str(), key.as_str()) {
                    return Err(GraphError::Invariant(format!(
                        "'{child}' has two parents: '{prev}' and '{key}'"
                    )));
                }
            }
        }
        for start in self.nodes.keys() {
            let mut cur = start.as_str();
            let mut steps = 0;
            while let Some(p) = parent.get(cur) {
                steps += 1;
                if *p == start || steps > self.nodes.len() {
                    return Err(GraphError::WouldCreateCycle {
                        node: p.to_string(),
                        child: cur.to_string(),
                    });
                }
                cur = p;
            }
        }
        Ok(())
    }

    /// Deterministic text handed to planners; identical to the file format.
    pub fn render_for_prompt(&self) -> String {
        self.serialize()
    }

    pub(crate) fn from_nodes_unchecked(nodes: IndexMap<String, SceneNode>) -> Self {
        Self { nodes }
    }

    pub(crate) fn nodes_mut(&mut self) -> &mut IndexMap<String, SceneNode> {
        &mut self.nodes
    }
}

fn check_coordinates(name: &str, c: Option<[f64; 3]>) -> Result<()> {
    match c {
        Some(xyz) if xyz.iter().any(|v| !v.is_finite()) => {
            Err(GraphError::NonFiniteValue(name.to_string()))
        }
        _ => Ok(()),
    }
}

//! Structural differences between two graph snapshots.

use super::{Attribute, AttributeValue, GraphError, Result, SceneGraph, SceneNode};
use serde::Serialize;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AttributeChange {
    pub node: String,
    pub attribute: Attribute,
    pub old: AttributeValue,
    pub new: AttributeValue,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct Reparent {
    pub node: String,
    pub old_parent: Option<String>,
    pub new_parent: Option<String>,
}

/// Difference from an old snapshot to a new one.
///
/// `added` carries whole nodes so the delta can be replayed. `reparented` is
/// derived from the `contains` changes and is informational: applying the
/// delta only uses `removed`, `added` and `attribute_changes`.
#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct GraphDelta {
    #[serde(serialize_with = "added_names")]
    pub added: Vec<SceneNode>,
    pub removed: Vec<String>,
    pub attribute_changes: Vec<AttributeChange>,
    pub reparented: Vec<Reparent>,
}

fn added_names<S: serde::Serializer>(nodes: &[SceneNode], s: S) -> std::result::Result<S::Ok, S::Error> {
    s.collect_seq(nodes.iter().map(|n| n.name.as_str()))
}

impl GraphDelta {
    pub fn is_empty(&self) -> bool {
        self.added.is_empty()
            && self.removed.is_empty()
            && self.attribute_changes.is_empty()
            && self.reparented.is_empty()
    }

    pub fn added_names(&self) -> Vec<&str> {
        self.added.iter().map(|n| n.name.as_str()).collect()
    }
}

impl SceneGraph {
    pub fn diff(&self, new: &SceneGraph) -> GraphDelta {
        let removed = self
            .names()
            .filter(|n| !new.contains_node(n))
            .map(str::to_string)
            .collect();
        let added = new
            .nodes()
            .filter(|n| !self.contains_node(&n.name))
            .cloned()
            .collect();
        let mut attribute_changes = Vec::new();
        let mut reparented = Vec::new();
        for node in new.nodes() {
            let Some(old) = self.get(&node.name) else {
                continue;
            };
            for attribute in Attribute::ALL {
                let (a, b) = (old.get(attribute), node.get(attribute));
                if a != b {
                    attribute_changes.push(AttributeChange {
                        node: node.name.clone(),
                        attribute,
                        old: a,
                        new: b,
                    });
                }
            }
            let (p_old, p_new) = (self.parent_of(&node.name), new.parent_of(&node.name));
            if p_old != p_new {
                reparented.push(Reparent {
                    node: node.name.clone(),
                    old_parent: p_old.map(str::to_string),
                    new_parent: p_new.map(str::to_string),
                });
            }
        }
        GraphDelta {
            added,
            removed,
            attribute_changes,
            reparented,
        }
    }

    /// Replays `delta` onto this graph. Every recorded old value must match
    /// the current one, and the result must satisfy all graph invariants.
    pub fn apply(&self, delta: &GraphDelta) -> Result<SceneGraph> {
        let mut next = self.clone();
        let nodes = next.nodes_mut();
        for name in &delta.removed {
            if nodes.shift_remove(name).is_none() {
                return Err(GraphError::DeltaMismatch(format!("cannot remove unknown '{name}'")));
            }
        }
        for node in &delta.added {
            if nodes.insert(node.name.clone(), node.clone()).is_some() {
                return Err(GraphError::DeltaMismatch(format!("'{}' already exists", node.name)));
            }
        }
        for change in &delta.attribute_changes {
            let node = nodes
                .get_mut(&change.node)
                .ok_or_else(|| GraphError::DeltaMismatch(format!("unknown node '{}'", change.node)))?;
            if node.get(change.attribute) != change.old {
                return Err(GraphError::DeltaMismatch(format!(
                    "'{}'.{} does not hold the recorded old value",
                    change.node, change.attribute
                )));
            }
            node.set_unchecked(change.attribute, change.new.clone())?;
        }
        next.validate()
            .map_err(|e| GraphError::DeltaMismatch(e.to_string()))?;
        Ok(next)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::scene_graph::ROOT;

    fn sample() -> SceneGraph {
        SceneGraph::new()
            .add_object(SceneNode::new("table"), ROOT)
            .unwrap()
            .add_object(SceneNode::new("apple"), "table")
            .unwrap()
    }

    #[test]
    fn diff_of_identical_graphs_is_empty() {
        let g = sample();
        assert!(g.diff(&g).is_empty());
    }

    #[test]
    fn single_coordinate_change() {
        let g = sample();
        let h = g.set_coordinates("apple", [0.1, 0.2, 0.3]).unwrap();
        let d = g.diff(&h);
        assert_eq!(d.attribute_changes.len(), 1);
        assert_eq!(d.attribute_changes[0].attribute, Attribute::Coordinates);
        assert!(d.added.is_empty() && d.removed.is_empty() && d.reparented.is_empty());
        assert_eq!(g.apply(&d).unwrap(), h);
    }

    #[test]
    fn stale_delta_rejected() {
        let g = sample();
        let h = g.set_coordinates("apple", [0.1, 0.2, 0.3]).unwrap();
        let d = g.diff(&h);
        assert!(matches!(h.apply(&d), Err(GraphError::DeltaMismatch(_))));
    }
}

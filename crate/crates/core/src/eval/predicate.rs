use crate::scene_graph::SceneGraph;
use crate::sim::{Region, Support, WorldState};
use serde::{Deserialize, Serialize};

/// A checkable statement about the final world or the final scene graph.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case", deny_unknown_fields)]
pub enum Predicate {
    /// World: `object` rests inside `container`.
    Inside { object: String, container: String },
    /// World: `object` rests directly on `support`.
    On { object: String, support: String },
    /// World: each listed object rests on the previous one.
    Stack { order: Vec<String> },
    /// World: `object` lies on the segment from `a` to `b`, away from its
    /// ends, within `tolerance` of the line.
    Between {
        object: String,
        a: String,
        b: String,
        #[serde(default = "default_between_tolerance")]
        tolerance: f64,
    },
    /// World: `object` is within `max_distance` (xy) of every one of `others`.
    Near { object: String, others: Vec<String>, max_distance: f64 },
    /// World: `container`'s lid is on it.
    Closed { container: String },
    /// World: `object` rests on the table itself.
    OnTable { object: String },
    /// World: `object`'s center lies in the region.
    InRegion { object: String, region: Region },
    /// Graph: `parent` lists `children` (only them when `exact`).
    Contains {
        parent: String,
        children: Vec<String>,
        #[serde(default)]
        exact: bool,
    },
    /// Graph: `child`'s parent is `parent`.
    ChildOf { child: String, parent: String },
    /// Graph: `node`'s coordinates are set and within `tolerance` (xy) of
    /// the object's true position.
    Fresh {
        node: String,
        #[serde(default = "default_fresh_tolerance")]
        tolerance: f64,
    },
    /// Graph: `node` has no coordinates.
    Cleared { node: String },
    /// Graph: `node` exists.
    HasNode { node: String },
    /// Graph: `node`'s position note contains `text` (case-insensitive).
    PositionText { node: String, text: String },
}

fn default_between_tolerance() -> f64 {
    0.05
}

fn default_fresh_tolerance() -> f64 {
    0.02
}

fn xy(world: &WorldState, name: &str) -> Option<[f64; 2]> {
    world.objects.get(name).map(|o| [o.position[0], o.position[1]])
}

impl Predicate {
    pub fn holds(&self, world: &WorldState, graph: &SceneGraph) -> bool {
        let support = |o: &str| world.support.get(o);
        match self {
            Predicate::Inside { object, container } => support(object) == Some(&Support::In(container.clone())),
            Predicate::On { object, support: s } => support(object) == Some(&Support::On(s.clone())),
            Predicate::Stack { order } => {
                order.windows(2).all(|w| support(&w[1]) == Some(&Support::On(w[0].clone())))
            }
            Predicate::Between { object, a, b, tolerance } => {
                let (Some(p), Some(a), Some(b)) = (xy(world, object), xy(world, a), xy(world, b)) else {
                    return false;
                };
                let d = [b[0] - a[0], b[1] - a[1]];
                let len2 = d[0] * d[0] + d[1] * d[1];
                if len2 == 0.0 {
                    return false;
                }
                let t = ((p[0] - a[0]) * d[0] + (p[1] - a[1]) * d[1]) / len2;
                let off = ((p[0] - a[0]) * d[1] - (p[1] - a[1]) * d[0]).abs() / len2.sqrt();
                (0.25..=0.75).contains(&t) && off <= *tolerance && !world.is_held(object)
            }
            Predicate::Near { object, others, max_distance } => {
                let Some(p) = xy(world, object) else { return false };
                others.iter().all(|o| xy(world, o).is_some_and(|q| (p[0] - q[0]).hypot(p[1] - q[1]) <= *max_distance))
            }
            Predicate::Closed { container } => world.is_closed(container),
            Predicate::OnTable { object } => support(object) == Some(&Support::Table),
            Predicate::InRegion { object, region } => xy(world, object).is_some_and(|p| {
                (region.x[0]..=region.x[1]).contains(&p[0]) && (region.y[0]..=region.y[1]).contains(&p[1])
            }),
            Predicate::Contains { parent, children, exact } => graph.get(parent).is_some_and(|n| {
                children.iter().all(|c| n.contains.contains(c)) && (!exact || n.contains.len() == children.len())
            }),
            Predicate::ChildOf { child, parent } => graph.parent_of(child) == Some(parent.as_str()),
            Predicate::Fresh { node, tolerance } => {
                let (Some(c), Some(p)) = (graph.get(node).and_then(|n| n.coordinates), xy(world, node)) else {
                    return false;
                };
                (c[0] - p[0]).hypot(c[1] - p[1]) <= *tolerance
            }
            Predicate::Cleared { node } => graph.get(node).is_some_and(|n| n.coordinates.is_none()),
            Predicate::HasNode { node } => graph.contains_node(node),
            Predicate::PositionText { node, text } => graph
                .get(node)
                .is_some_and(|n| n.position_descriptor.to_lowercase().contains(&text.to_lowercase())),
        }
    }

    /// Every entity name the predicate mentions.
    pub fn entities(&self) -> Vec<&str> {
        match self {
            Predicate::Inside { object, container } => vec![object, container],
            Predicate::On { object, support } => vec![object, support],
            Predicate::Stack { order } => order.iter().map(String::as_str).collect(),
            Predicate::Between { object, a, b, .. } => vec![object, a, b],
            Predicate::Near { object, others, .. } => {
                std::iter::once(object.as_str()).chain(others.iter().map(String::as_str)).collect()
            }
            Predicate::Closed { container } => vec![container],
            Predicate::OnTable { object } | Predicate::InRegion { object, .. } => vec![object],
            Predicate::Contains { parent, children, .. } => {
                std::iter::once(parent.as_str()).chain(children.iter().map(String::as_str)).collect()
            }
            Predicate::ChildOf { child, parent } => vec![child, parent],
            Predicate::Fresh { node, .. }
            | Predicate::Cleared { node }
            | Predicate::HasNode { node }
            | Predicate::PositionText { node, .. } => vec![node],
        }
    }

    /// Whether the predicate reads the scene graph (otherwise the world).
    pub fn is_graph(&self) -> bool {
        matches!(
            self,
            Predicate::Contains { .. }
                | Predicate::ChildOf { .. }
                | Predicate::Fresh { .. }
                | Predicate::Cleared { .. }
                | Predicate::HasNode { .. }
                | Predicate::PositionText { .. }
        )
    }
}

use super::predicate::Predicate;
use super::EvalError;
use crate::backends::{PlannerSpec, VlmNoise};
use crate::geometry::PerceptionConfig;
use crate::orchestrator::Intervention;
use crate::scene_graph::SceneGraph;
use crate::sim::{FaultSpec, WorldSpec, WorldState};
use crate::tools::ToolMode;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use std::collections::HashSet;
use std::path::Path;

/// One benchmark task. See `scenarios/` for examples.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Scenario {
    pub id: String,
    pub request: String,
    #[serde(default)]
    pub mode: ToolMode,
    pub world: WorldSpec,
    /// Initial scene graph, in the scene-graph file format.
    pub graph: Value,
    /// Nodes whose initial coordinates are taken from the built world (what
    /// a scan, or a tag read for tagged objects, would report).
    #[serde(default)]
    pub graph_coordinates_from_world: Vec<String>,
    /// Draw region-bound objects' positions from the trial seed.
    #[serde(default)]
    pub randomize: bool,
    #[serde(default)]
    pub planner: PlannerSpec,
    pub success: Vec<Predicate>,
    #[serde(default)]
    pub sgh: Vec<Predicate>,
    #[serde(default)]
    pub faults: Vec<FaultSpec>,
    #[serde(default)]
    pub vlm: VlmNoise,
    #[serde(default)]
    pub perception: PerceptionConfig,
    /// Batch-mode answer when the robot asks for help.
    #[serde(default = "abort")]
    pub intervention: Intervention,
    #[serde(default = "five")]
    pub trials: usize,
    #[serde(default)]
    pub seed: u64,
}

fn abort() -> Intervention {
    Intervention::Abort
}

fn five() -> usize {
    5
}

impl Scenario {
    pub fn from_json_str(text: &str) -> Result<Self, EvalError> {
        let s: Scenario = serde_json::from_str(text).map_err(|e| EvalError::ScenarioParse(e.to_string()))?;
        s.check()?;
        Ok(s)
    }

    pub fn load(path: &Path) -> Result<Self, EvalError> {
        let text = std::fs::read_to_string(path).map_err(|e| EvalError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map_err(|e| match e {
            EvalError::ScenarioParse(m) => EvalError::ScenarioParse(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn initial_graph(&self) -> Result<SceneGraph, EvalError> {
        SceneGraph::from_json(&self.graph).map_err(|e| EvalError::ScenarioParse(format!("{}: graph: {e}", self.id)))
    }

    /// Predicates may only mention world objects and graph nodes; `has_node`
    /// is exempt since it asserts a node the run must create.
    fn check(&self) -> Result<(), EvalError> {
        let graph = self.initial_graph()?;
        let world: HashSet<&str> = self.world.objects.iter().map(|o| o.name.as_str()).collect();
        for p in self.success.iter().chain(&self.sgh).filter(|p| !matches!(p, Predicate::HasNode { .. })) {
            for e in p.entities() {
                if !world.contains(e) && !graph.contains_node(e) {
                    return Err(EvalError::ScenarioParse(format!("{}: predicate mentions unknown entity {e}", self.id)));
                }
            }
        }
        for n in &self.graph_coordinates_from_world {
            if !world.contains(n.as_str()) || !graph.contains_node(n) {
                return Err(EvalError::ScenarioParse(format!("{}: cannot seed coordinates of {n}", self.id)));
            }
        }
        Ok(())
    }

    /// World and graph for one trial seed.
    pub fn build(&self, seed: u64, with_faults: bool) -> Result<(WorldState, SceneGraph), EvalError> {
        let faults: &[FaultSpec] = if with_faults { &self.faults } else { &[] };
        let world =
            self.world.build(seed, self.randomize, faults).map_err(|e| EvalError::ScenarioParse(format!("{}: {e}", self.id)))?;
        let mut graph = self.initial_graph()?;
        for n in &self.graph_coordinates_from_world {
            let o = &world.objects[n];
            let xyz = match o.tag {
                Some(_) => [o.position[0], o.position[1], o.top()],
                None => world
                    .visible_surface_centroid(n, self.perception.voxel, self.perception.z_epsilon)
                    .unwrap_or(o.position),
            };
            graph = graph.set_coordinates(n, xyz).map_err(|e| EvalError::ScenarioParse(e.to_string()))?;
        }
        Ok((world, graph))
    }
}

//! Declarative world description, as embedded in scenario files.

use super::faults::FaultSpec;
use super::rng;
use super::shapes::{PlacedFootprint, Shape};
use super::world::{SimConfig, SimObject, Support, TableExtent, WorldState};
use super::SimError;
use rand::Rng;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TableSpec {
    #[serde(flatten)]
    pub extent: TableExtent,
    #[serde(default)]
    pub z: f64,
}

impl Default for TableSpec {
    fn default() -> Self {
        Self { extent: TableExtent::default(), z: 0.0 }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Region {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObjectSpec {
    pub name: String,
    pub shape: Shape,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub xy: Option<[f64; 2]>,
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default = "yes")]
    pub graspable: bool,
    #[serde(default)]
    pub container: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lid_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<u32>,
    /// Rests on top of this earlier object (centered on it).
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub on: Option<String>,
    /// Sits inside this earlier container.
    #[serde(default, rename = "in", skip_serializing_if = "Option::is_none")]
    pub inside: Option<String>,
    /// Randomization area for the object's xy.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub region: Option<Region>,
}

fn yes() -> bool {
    true
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldSpec {
    #[serde(default)]
    pub table: TableSpec,
    #[serde(default)]
    pub config: SimConfig,
    pub objects: Vec<ObjectSpec>,
}

const LAYOUT_TRIES: u64 = 500;
const LAYOUT_CLEARANCE: f64 = 0.03;

impl WorldSpec {
    /// Builds the world. With `randomize`, objects that declare a region get
    /// an xy drawn uniformly from it (avoiding other table-level objects);
    /// everything else keeps its declared position.
    pub fn build(&self, seed: u64, randomize: bool, faults: &[FaultSpec]) -> Result<WorldState, SimError> {
        let mut w = WorldState::new(seed, self.table.z, self.table.extent, self.config);
        let mut layout = rng::stream(seed, &[rng::LAYOUT]);
        for spec in &self.objects {
            if !spec.shape.is_valid() {
                return Err(SimError::InvalidWorld(format!("{}: dimensions must be positive", spec.name)));
            }
            if w.objects.contains_key(&spec.name) {
                return Err(SimError::InvalidWorld(format!("duplicate object {}", spec.name)));
            }
            let mut obj = SimObject {
                name: spec.name.clone(),
                shape: spec.shape,
                position: [0.0; 3],
                yaw: spec.yaw,
                color: spec.color.clone(),
                category: spec.category.clone(),
                graspable: spec.graspable,
                container: spec.container,
                lid_of: spec.lid_of.clone(),
                tag: spec.tag,
            };
            let half_h = spec.shape.height() / 2.0;
            let known = |n: &str, w: &WorldState| {
                w.objects
                    .get(n)
                    .cloned()
                    .ok_or_else(|| SimError::InvalidWorld(format!("{} refers to unknown or later object {n}", spec.name)))
            };
            let support = match (&spec.on, &spec.inside) {
                (Some(_), Some(_)) => {
                    return Err(SimError::InvalidWorld(format!("{}: both 'on' and 'in'", spec.name)));
                }
                (Some(s), None) => {
                    let base = known(s, &w)?;
                    obj.position = [base.position[0], base.position[1], base.top() + half_h];
                    Support::On(s.clone())
                }
                (None, Some(c)) => {
                    let cont = known(c, &w)?;
                    if !cont.container {
                        return Err(SimError::InvalidWorld(format!("{c} is not a container")));
                    }
                    // Place through the regular rules so contents never overlap.
                    let xy = spec.xy.unwrap_or([cont.position[0], cont.position[1]]);
                    obj.position = [xy[0], xy[1], 0.0];
                    w.objects.insert(obj.name.clone(), obj.clone());
                    w.gripper = Some(obj.name.clone());
                    let out = w
                        .place([xy[0], xy[1], 0.0])
                        .map_err(|e| SimError::InvalidWorld(format!("{}: {e}", spec.name)))?;
                    if out.support != Support::In(c.clone()) {
                        return Err(SimError::InvalidWorld(format!("{} did not land inside {c}", spec.name)));
                    }
                    continue;
                }
                (None, None) => {
                    let mut xy = spec
                        .xy
                        .ok_or_else(|| SimError::InvalidWorld(format!("{} needs xy, on or in", spec.name)))?;
                    if let (true, Some(region)) = (randomize, spec.region) {
                        if let Some(p) = sample_free(&w, &obj, &region, &mut layout) {
                            xy = p;
                        }
                    }
                    obj.position = [xy[0], xy[1], self.table.z + half_h];
                    if !w.table_extent.contains(xy[0], xy[1]) {
                        return Err(SimError::InvalidWorld(format!("{} is off the table", spec.name)));
                    }
                    Support::Table
                }
            };
            w.support.insert(obj.name.clone(), support);
            w.objects.insert(obj.name.clone(), obj);
        }
        for o in w.objects.values() {
            if let Some(c) = &o.lid_of {
                if !w.objects.get(c).is_some_and(|c| c.container) {
                    return Err(SimError::InvalidWorld(format!("{} is a lid of non-container {c}", o.name)));
                }
            }
        }
        for f in faults {
            w.inject_fault(f.clone());
        }
        w.check_invariants().map_err(SimError::InvalidWorld)?;
        Ok(w)
    }
}

fn sample_free(w: &WorldState, obj: &SimObject, region: &Region, r: &mut impl Rng) -> Option<[f64; 2]> {
    for _ in 0..LAYOUT_TRIES {
        let x = r.random_range(region.x[0]..=region.x[1]);
        let y = r.random_range(region.y[0]..=region.y[1]);
        let mut fp = PlacedFootprint { center: [x, y], yaw: obj.yaw, shape: obj.shape.footprint() };
        fp.shape = fp.shape.inflated(LAYOUT_CLEARANCE);
        let clear = w
            .support
            .iter()
            .filter(|(_, s)| **s == Support::Table)
            .all(|(n, _)| fp.overlap(&w.objects[n].footprint()) == 0.0);
        if clear {
            return Some([x, y]);
        }
    }
    None
}

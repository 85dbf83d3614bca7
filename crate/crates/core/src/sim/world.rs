use super::faults::{FaultSchedule, FaultSpec};
use super::shapes::{Footprint, PlacedFootprint, Shape, FLOOR, WALL};
use super::SimError;
use crate::geometry::CameraIntrinsics;
use indexmap::IndexMap;
use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimObject {
    pub name: String,
    pub shape: Shape,
    /// Center of the bounding volume.
    pub position: [f64; 3],
    #[serde(default)]
    pub yaw: f64,
    #[serde(default)]
    pub color: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default = "yes")]
    pub graspable: bool,
    /// Open-topped box with an interior support surface.
    #[serde(default)]
    pub container: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub lid_of: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub tag: Option<u32>,
}

fn yes() -> bool {
    true
}

impl SimObject {
    pub fn top(&self) -> f64 {
        self.position[2] + self.shape.height() / 2.0
    }

    pub fn bottom(&self) -> f64 {
        self.position[2] - self.shape.height() / 2.0
    }

    pub fn footprint(&self) -> PlacedFootprint {
        PlacedFootprint {
            center: [self.position[0], self.position[1]],
            yaw: self.yaw,
            shape: self.shape.footprint(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(tag = "kind", content = "of", rename_all = "snake_case")]
pub enum Support {
    Table,
    On(String),
    In(String),
}

impl Support {
    pub fn supporter(&self) -> Option<&str> {
        match self {
            Support::Table => None,
            Support::On(s) | Support::In(s) => Some(s),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TableExtent {
    pub x: [f64; 2],
    pub y: [f64; 2],
}

impl Default for TableExtent {
    fn default() -> Self {
        Self { x: [-0.5, 0.5], y: [-0.95, -0.25] }
    }
}

impl TableExtent {
    pub fn contains(&self, x: f64, y: f64) -> bool {
        x >= self.x[0] && x <= self.x[1] && y >= self.y[0] && y <= self.y[1]
    }

    pub fn center(&self) -> [f64; 2] {
        [(self.x[0] + self.x[1]) / 2.0, (self.y[0] + self.y[1]) / 2.0]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SimConfig {
    pub grasp_tolerance: f64,
    pub overlap_limit: f64,
    pub min_visible_fraction: f64,
    /// Standard deviation of additive depth noise, meters.
    pub depth_noise: f64,
    pub intrinsics: CameraIntrinsics,
    pub views: usize,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            grasp_tolerance: 0.02,
            overlap_limit: 0.5,
            min_visible_fraction: 0.3,
            depth_noise: 0.0,
            intrinsics: CameraIntrinsics::default(),
            views: 3,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlaceOutcome {
    pub object: String,
    pub position: [f64; 3],
    pub support: Support,
}

/// Ground truth of the simulated workspace.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WorldState {
    pub table_z: f64,
    pub table_extent: TableExtent,
    pub config: SimConfig,
    pub objects: IndexMap<String, SimObject>,
    pub gripper: Option<String>,
    pub support: IndexMap<String, Support>,
    pub faults: FaultSchedule,
    /// Captures taken so far; seeds per-capture noise.
    pub captures: u64,
}

const SLOT_STEP: f64 = 0.005;
const SLOT_MARGIN: f64 = 0.005;

impl WorldState {
    pub fn new(seed: u64, table_z: f64, table_extent: TableExtent, config: SimConfig) -> Self {
        Self {
            table_z,
            table_extent,
            config,
            objects: IndexMap::new(),
            gripper: None,
            support: IndexMap::new(),
            faults: FaultSchedule { seed, faults: vec![] },
            captures: 0,
        }
    }

    pub fn seed(&self) -> u64 {
        self.faults.seed
    }

    pub fn object(&self, name: &str) -> Result<&SimObject, SimError> {
        self.objects.get(name).ok_or_else(|| SimError::UnknownObject(name.to_string()))
    }

    pub fn is_held(&self, name: &str) -> bool {
        self.gripper.as_deref() == Some(name)
    }

    /// Objects resting directly on top of `name` (not inside it).
    pub fn covering(&self, name: &str) -> Option<&str> {
        self.support
            .iter()
            .find(|(_, s)| matches!(s, Support::On(x) if x == name))
            .map(|(n, _)| n.as_str())
    }

    pub fn lid_of(&self, container: &str) -> Option<&str> {
        self.objects
            .values()
            .find(|o| o.lid_of.as_deref() == Some(container))
            .map(|o| o.name.as_str())
    }

    pub fn is_closed(&self, container: &str) -> bool {
        self.lid_of(container)
            .is_some_and(|lid| self.support.get(lid) == Some(&Support::On(container.to_string())))
    }

    /// The closed container hiding `name`, if any.
    pub fn enclosing_closed_container(&self, name: &str) -> Option<&str> {
        let mut cur = name;
        let mut guard = 0;
        while let Some(s) = self.support.get(cur) {
            match s {
                Support::Table => return None,
                Support::In(c) if self.is_closed(c) => return Some(c.as_str()),
                Support::In(c) | Support::On(c) => cur = c,
            }
            guard += 1;
            if guard > self.objects.len() {
                return None;
            }
        }
        None
    }

    /// Objects carried along when `name` moves: everything resting on or in
    /// it, transitively, in object order.
    fn dependents(&self, name: &str) -> Vec<String> {
        let mut out = Vec::new();
        let mut frontier = vec![name.to_string()];
        while let Some(cur) = frontier.pop() {
            for (n, s) in &self.support {
                if s.supporter() == Some(cur.as_str()) && !out.contains(n) {
                    out.push(n.clone());
                    frontier.push(n.clone());
                }
            }
        }
        out
    }

    fn translate_tree(&mut self, name: &str, delta: [f64; 3]) {
        let mut names = vec![name.to_string()];
        names.extend(self.dependents(name));
        for n in names {
            let p = &mut self.objects[&n].position;
            for k in 0..3 {
                p[k] += delta[k];
            }
        }
    }

    pub fn inject_fault(&mut self, fault: FaultSpec) {
        self.faults.push(fault);
    }

    /// Grasps `name` at `grasp`. The grasp must lie within the tolerance of
    /// the object's center horizontally and within the object's vertical
    /// extent (plus tolerance).
    pub fn pick(&mut self, name: &str, grasp: [f64; 3]) -> Result<(), SimError> {
        if let Some(h) = &self.gripper {
            return Err(SimError::GripperOccupied(h.clone()));
        }
        let obj = self.object(name)?;
        if !obj.graspable {
            return Err(SimError::NotGraspable(name.to_string()));
        }
        if let Some(c) = self.enclosing_closed_container(name) {
            return Err(SimError::ObjectInsideClosedContainer {
                object: name.to_string(),
                container: c.to_string(),
            });
        }
        // Anything resting on or inside blocks the grasp.
        if let Some(by) = self.support.iter().find(|(_, s)| s.supporter() == Some(name)).map(|(n, _)| n.as_str()) {
            return Err(SimError::ObjectCovered {
                object: name.to_string(),
                by: by.to_string(),
            });
        }
        let tol = self.config.grasp_tolerance;
        let dxy = ((grasp[0] - obj.position[0]).powi(2) + (grasp[1] - obj.position[1]).powi(2)).sqrt();
        let in_band = grasp[2] >= obj.bottom() - tol && grasp[2] <= obj.top() + tol;
        if dxy > tol || !in_band {
            let d = if dxy > tol {
                dxy
            } else {
                let p = obj.position;
                ((grasp[0] - p[0]).powi(2) + (grasp[1] - p[1]).powi(2) + (grasp[2] - p[2]).powi(2)).sqrt()
            };
            return Err(SimError::GraspMissed { distance: d });
        }
        if self.faults.take_grasp_slip(name) {
            return Err(SimError::GraspMissed { distance: dxy });
        }
        self.support.shift_remove(name);
        self.gripper = Some(name.to_string());
        Ok(())
    }

    /// Releases the held object at `target` (only x and y are used; the
    /// height snaps to whatever supports it there).
    pub fn place(&mut self, target: [f64; 3]) -> Result<PlaceOutcome, SimError> {
        let held = self.gripper.clone().ok_or(SimError::GripperEmpty)?;
        let (x, y) = (target[0], target[1]);
        if !self.table_extent.contains(x, y) {
            return Err(SimError::OutOfWorkspace { x, y });
        }
        let h = self.objects[&held].clone();
        let supporter = self
            .support
            .keys()
            .filter(|n| self.objects[*n].footprint().contains(x, y))
            .max_by(|a, b| self.objects[*a].top().total_cmp(&self.objects[*b].top()).then(std::cmp::Ordering::Greater))
            .cloned();

        let (position, support) = match supporter {
            Some(s) if h.lid_of.as_deref() == Some(s.as_str()) => {
                if self.covering(&s).is_some() {
                    return Err(SimError::PlacementCollision(format!("{s} already has something on top")));
                }
                let so = &self.objects[&s];
                ([so.position[0], so.position[1], so.top() + h.shape.height() / 2.0], Support::On(s))
            }
            Some(s) if self.objects[&s].container && self.covering(&s).is_none() => {
                if h.lid_of.is_some() {
                    return Err(SimError::PlacementCollision(format!("{held} is not the lid of {s}")));
                }
                let p = self
                    .free_slot(&s, &h, x, y)
                    .ok_or_else(|| SimError::PlacementCollision(format!("no room for {held} in {s}")))?;
                (p, Support::In(s))
            }
            Some(s) => {
                let so = &self.objects[&s];
                let fits = h.shape.footprint().area() <= so.shape.footprint().area() + 1e-12;
                if !so.shape.flat_top() || !fits || h.container {
                    return Err(SimError::PlacementCollision(format!("{held} cannot rest on {s}")));
                }
                ([so.position[0], so.position[1], so.top() + h.shape.height() / 2.0], Support::On(s))
            }
            None => {
                let fp = PlacedFootprint { center: [x, y], ..h.footprint() };
                for (n, _) in &self.support {
                    let o = &self.objects[n];
                    if fp.overlap(&o.footprint()) > self.config.overlap_limit {
                        return Err(SimError::PlacementCollision(format!("{held} would land on {n}")));
                    }
                }
                ([x, y, self.table_z + h.shape.height() / 2.0], Support::Table)
            }
        };
        let old = h.position;
        self.translate_tree(&held, [position[0] - old[0], position[1] - old[1], position[2] - old[2]]);
        self.support.insert(held.clone(), support.clone());
        self.gripper = None;
        Ok(PlaceOutcome { object: held, position, support })
    }

    /// Nearest interior position to `(x, y)` where `h` fits without touching
    /// other contents; scanned on a fixed grid so the answer is stable.
    fn free_slot(&self, container: &str, h: &SimObject, x: f64, y: f64) -> Option<[f64; 3]> {
        let c = &self.objects[container];
        let (hx, hy) = match h.shape.footprint() {
            Footprint::Rect { hw, hd } => (hw, hd),
            Footprint::Circle { r } => (r, r),
        };
        // Interior half extents, plus the radius limit for round containers.
        let (rx, ry, round) = match c.shape.footprint() {
            Footprint::Rect { hw, hd } => (hw - WALL - hx, hd - WALL - hy, None),
            Footprint::Circle { r } => {
                let reach = match h.shape.footprint() {
                    Footprint::Rect { hw, hd } => hw.hypot(hd),
                    Footprint::Circle { r } => r,
                };
                let lim = r - WALL - reach;
                (lim, lim, Some(lim))
            }
        };
        if rx < 0.0 || ry < 0.0 {
            return None;
        }
        let (s, co) = c.yaw.sin_cos();
        let (dx, dy) = (x - c.position[0], y - c.position[1]);
        let (tx, ty) = (co * dx + s * dy, -s * dx + co * dy);
        let nx = (rx / SLOT_STEP).floor() as i64;
        let ny = (ry / SLOT_STEP).floor() as i64;
        let mut candidates = Vec::new();
        for i in -nx..=nx {
            for j in -ny..=ny {
                let (lx, ly) = (i as f64 * SLOT_STEP, j as f64 * SLOT_STEP);
                if round.is_some_and(|lim| lx.hypot(ly) > lim + 1e-12) {
                    continue;
                }
                candidates.push(((lx - tx).powi(2) + (ly - ty).powi(2), lx, ly));
            }
        }
        candidates.sort_by(|a, b| a.0.total_cmp(&b.0));
        let contents: Vec<PlacedFootprint> = self
            .support
            .iter()
            .filter(|(_, s)| matches!(s, Support::In(n) if n == container))
            .map(|(n, _)| {
                let mut f = self.objects[n].footprint();
                f.shape = f.shape.inflated(SLOT_MARGIN);
                f
            })
            .collect();
        for (_, lx, ly) in candidates {
            let wx = c.position[0] + co * lx - s * ly;
            let wy = c.position[1] + s * lx + co * ly;
            let fp = PlacedFootprint { center: [wx, wy], yaw: c.yaw, shape: h.shape.footprint() };
            if contents.iter().all(|o| fp.overlap(o) == 0.0) {
                return Some([wx, wy, c.bottom() + FLOOR + h.shape.height() / 2.0]);
            }
        }
        None
    }

    /// Operator intervention: move `name` (and whatever it carries) onto the
    /// table at `(x, y)`.
    pub fn reposition(&mut self, name: &str, xy: [f64; 2]) -> Result<(), SimError> {
        if self.is_held(name) {
            return Err(SimError::GripperOccupied(name.to_string()));
        }
        let o = self.object(name)?.clone();
        if !self.table_extent.contains(xy[0], xy[1]) {
            return Err(SimError::OutOfWorkspace { x: xy[0], y: xy[1] });
        }
        let z = self.table_z + o.shape.height() / 2.0;
        self.translate_tree(name, [xy[0] - o.position[0], xy[1] - o.position[1], z - o.position[2]]);
        self.support.insert(name.to_string(), Support::Table);
        Ok(())
    }

    /// Resting objects (everything not in the gripper).
    pub fn resting(&self) -> impl Iterator<Item = &SimObject> {
        self.objects.values().filter(|o| !self.is_held(&o.name))
    }

    pub fn check_invariants(&self) -> Result<(), String> {
        if let Some(h) = &self.gripper {
            if !self.objects.contains_key(h) {
                return Err(format!("held object {h} does not exist"));
            }
            if self.support.contains_key(h) {
                return Err(format!("held object {h} is in the support map"));
            }
        }
        for name in self.objects.keys() {
            if !self.is_held(name) && !self.support.contains_key(name) {
                return Err(format!("{name} has no support"));
            }
        }
        for (name, s) in &self.support {
            let mut cur = s.clone();
            let mut steps = 0;
            while let Some(p) = cur.supporter() {
                if !self.objects.contains_key(p) || self.is_held(p) {
                    return Err(format!("{name} rests on missing or held {p}"));
                }
                steps += 1;
                if steps > self.objects.len() {
                    return Err(format!("support cycle through {name}"));
                }
                cur = self.support[p].clone();
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn obj(name: &str, shape: Shape, xy: [f64; 2]) -> SimObject {
        SimObject {
            name: name.into(),
            shape,
            position: [xy[0], xy[1], shape.height() / 2.0],
            yaw: 0.0,
            color: "red".into(),
            category: None,
            graspable: true,
            container: false,
            lid_of: None,
            tag: None,
        }
    }

    fn world(objs: Vec<SimObject>) -> WorldState {
        let mut w = WorldState::new(1, 0.0, TableExtent::default(), SimConfig::default());
        for o in objs {
            w.support.insert(o.name.clone(), Support::Table);
            w.objects.insert(o.name.clone(), o);
        }
        w
    }

    #[test]
    fn pick_and_miss() {
        let mut w = world(vec![obj("apple", Shape::Sphere { r: 0.035 }, [0.0, -0.6])]);
        match w.pick("apple", [0.1, -0.6, 0.035]) {
            Err(SimError::GraspMissed { distance }) => assert!((distance - 0.1).abs() < 1e-9),
            other => panic!("{other:?}"),
        }
        let p = w.objects["apple"].position;
        w.pick("apple", p).unwrap();
        assert_eq!(w.gripper.as_deref(), Some("apple"));
        assert_eq!(w.pick("apple", p), Err(SimError::GripperOccupied("apple".into())));
    }

    #[test]
    fn place_on_table_and_stack() {
        let mut w = world(vec![
            obj("block", Shape::Box { w: 0.04, d: 0.04, h: 0.04 }, [0.0, -0.6]),
            obj("big", Shape::Disc { r: 0.05, h: 0.02 }, [0.2, -0.6]),
        ]);
        let p = w.objects["block"].position;
        w.pick("block", p).unwrap();
        let out = w.place([-0.2, -0.5, 0.3]).unwrap();
        assert_eq!(out.position, [-0.2, -0.5, 0.02]);
        w.pick("block", out.position).unwrap();
        let out = w.place([0.21, -0.6, 0.0]).unwrap();
        assert_eq!(out.support, Support::On("big".into()));
        assert!((out.position[2] - 0.04).abs() < 1e-12);
        assert!(matches!(
            w.pick("big", [0.2, -0.6, 0.01]),
            Err(SimError::ObjectCovered { .. })
        ));
        w.check_invariants().unwrap();
    }

    #[test]
    fn large_on_small_collides() {
        let mut w = world(vec![
            obj("small", Shape::Disc { r: 0.03, h: 0.02 }, [0.0, -0.6]),
            obj("large", Shape::Disc { r: 0.05, h: 0.02 }, [0.2, -0.6]),
        ]);
        w.pick("large", [0.2, -0.6, 0.01]).unwrap();
        assert!(matches!(w.place([0.0, -0.6, 0.0]), Err(SimError::PlacementCollision(_))));
        assert!(matches!(w.place([0.0, -1.6, 0.0]), Err(SimError::OutOfWorkspace { .. })));
        assert_eq!(w.gripper.as_deref(), Some("large"));
    }

    #[test]
    fn containers_and_lids() {
        let mut b = obj("box", Shape::Box { w: 0.2, d: 0.15, h: 0.08 }, [0.0, -0.6]);
        b.container = true;
        let mut lid = obj("lid", Shape::Box { w: 0.2, d: 0.15, h: 0.01 }, [0.3, -0.6]);
        lid.lid_of = Some("box".into());
        let mut w = world(vec![b, lid, obj("lemon", Shape::Sphere { r: 0.03 }, [-0.3, -0.6])]);
        w.pick("lemon", [-0.3, -0.6, 0.03]).unwrap();
        let out = w.place([0.0, -0.6, 0.0]).unwrap();
        assert_eq!(out.support, Support::In("box".into()));
        assert!((out.position[2] - (FLOOR + 0.03)).abs() < 1e-12);
        w.pick("lid", [0.3, -0.6, 0.005]).unwrap();
        w.place([0.01, -0.61, 0.0]).unwrap();
        assert!(w.is_closed("box"));
        assert_eq!(w.enclosing_closed_container("lemon"), Some("box"));
        assert!(matches!(
            w.pick("lemon", out.position),
            Err(SimError::ObjectInsideClosedContainer { .. })
        ));
        w.check_invariants().unwrap();
    }

    #[test]
    fn container_carries_contents() {
        let mut b = obj("box", Shape::Box { w: 0.2, d: 0.15, h: 0.08 }, [0.0, -0.6]);
        b.container = true;
        let mut w = world(vec![b, obj("lemon", Shape::Sphere { r: 0.03 }, [-0.3, -0.6])]);
        w.pick("lemon", [-0.3, -0.6, 0.03]).unwrap();
        w.place([0.0, -0.6, 0.0]).unwrap();
        // A loaded box cannot be lifted, but moving it by hand takes the lemon along.
        assert!(matches!(w.pick("box", [0.0, -0.6, 0.04]), Err(SimError::ObjectCovered { .. })));
        w.reposition("box", [0.3, -0.5]).unwrap();
        let l = w.objects["lemon"].position;
        assert!((l[0] - 0.3).abs() < 1e-12 && (l[1] + 0.5).abs() < 1e-12);
    }
}

use crate::geometry::Vec3;
use serde::{Deserialize, Serialize};

/// Container floor and wall thickness. The floor is thinner than the
/// perception table band so it disappears with the table.
pub const FLOOR: f64 = 0.004;
pub const WALL: f64 = 0.005;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Shape {
    Box { w: f64, d: f64, h: f64 },
    Cylinder { r: f64, h: f64 },
    Sphere { r: f64 },
    Disc { r: f64, h: f64 },
}

impl Shape {
    pub fn height(&self) -> f64 {
        match *self {
            Shape::Box { h, .. } | Shape::Cylinder { h, .. } | Shape::Disc { h, .. } => h,
            Shape::Sphere { r } => 2.0 * r,
        }
    }

    pub fn is_valid(&self) -> bool {
        let dims: &[f64] = match self {
            Shape::Box { w, d, h } => &[*w, *d, *h],
            Shape::Cylinder { r, h } | Shape::Disc { r, h } => &[*r, *h],
            Shape::Sphere { r } => &[*r],
        };
        dims.iter().all(|v| v.is_finite() && *v > 0.0)
    }

    pub fn footprint(&self) -> Footprint {
        match *self {
            Shape::Box { w, d, .. } => Footprint::Rect { hw: w / 2.0, hd: d / 2.0 },
            Shape::Cylinder { r, .. } | Shape::Disc { r, .. } | Shape::Sphere { r } => Footprint::Circle { r },
        }
    }

    /// Whether something can rest on top.
    pub fn flat_top(&self) -> bool {
        !matches!(self, Shape::Sphere { .. })
    }

    /// Half extents of the local bounding box.
    pub fn half_extents(&self) -> Vec3 {
        let hh = self.height() / 2.0;
        match self.footprint() {
            Footprint::Rect { hw, hd } => Vec3::new(hw, hd, hh),
            Footprint::Circle { r } => Vec3::new(r, r, hh),
        }
    }

    /// Ray-intersectable pieces in the object's local frame (origin at the
    /// center, z up). Containers are open-topped shells.
    pub(crate) fn solids(&self, hollow: bool) -> Vec<Solid> {
        let hh = self.height() / 2.0;
        match *self {
            Shape::Box { w, d, .. } if hollow => {
                let (hw, hd) = (w / 2.0, d / 2.0);
                let aabb = |lo: [f64; 3], hi: [f64; 3]| Solid::Aabb {
                    lo: Vec3::from(lo),
                    hi: Vec3::from(hi),
                };
                vec![
                    aabb([-hw, -hd, -hh], [hw, hd, -hh + FLOOR]),
                    aabb([-hw, -hd, -hh], [-hw + WALL, hd, hh]),
                    aabb([hw - WALL, -hd, -hh], [hw, hd, hh]),
                    aabb([-hw, -hd, -hh], [hw, -hd + WALL, hh]),
                    aabb([-hw, hd - WALL, -hh], [hw, hd, hh]),
                ]
            }
            Shape::Box { w, d, .. } => vec![Solid::Aabb {
                lo: Vec3::new(-w / 2.0, -d / 2.0, -hh),
                hi: Vec3::new(w / 2.0, d / 2.0, hh),
            }],
            Shape::Cylinder { r, .. } if hollow => vec![
                Solid::Cyl { r, z0: -hh, z1: -hh + FLOOR },
                Solid::Tube { r_out: r, r_in: r - WALL, z0: -hh, z1: hh },
            ],
            Shape::Cylinder { r, .. } | Shape::Disc { r, .. } => vec![Solid::Cyl { r, z0: -hh, z1: hh }],
            Shape::Sphere { r } => vec![Solid::Ball { r }],
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub(crate) enum Solid {
    Aabb { lo: Vec3, hi: Vec3 },
    Cyl { r: f64, z0: f64, z1: f64 },
    /// Cylindrical wall between two radii.
    Tube { r_out: f64, r_in: f64, z0: f64, z1: f64 },
    Ball { r: f64 },
}

const T_MIN: f64 = 1e-9;

/// Ray parameters where the ray crosses the infinite vertical cylinder of
/// radius `r`, entry first.
fn side_roots(o: &Vec3, d: &Vec3, r: f64) -> Option<(f64, f64)> {
    let a = d.x * d.x + d.y * d.y;
    if a <= 1e-15 {
        return None;
    }
    let b = 2.0 * (o.x * d.x + o.y * d.y);
    let c = o.x * o.x + o.y * o.y - r * r;
    let disc = b * b - 4.0 * a * c;
    (disc >= 0.0).then(|| ((-b - disc.sqrt()) / (2.0 * a), (-b + disc.sqrt()) / (2.0 * a)))
}

impl Solid {
    /// Smallest positive ray parameter at which `o + t d` enters the solid.
    pub(crate) fn intersect(&self, o: &Vec3, d: &Vec3) -> Option<f64> {
        match *self {
            Solid::Aabb { lo, hi } => {
                let (mut t0, mut t1) = (f64::NEG_INFINITY, f64::INFINITY);
                for k in 0..3 {
                    if d[k].abs() < 1e-15 {
                        if o[k] < lo[k] || o[k] > hi[k] {
                            return None;
                        }
                    } else {
                        let a = (lo[k] - o[k]) / d[k];
                        let b = (hi[k] - o[k]) / d[k];
                        t0 = t0.max(a.min(b));
                        t1 = t1.min(a.max(b));
                    }
                }
                (t0 <= t1 && t0 > T_MIN).then_some(t0)
            }
            Solid::Cyl { r, z0, z1 } => {
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t > T_MIN && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                if let Some((t, _)) = side_roots(o, d, r) {
                    let z = o.z + t * d.z;
                    if z >= z0 && z <= z1 {
                        consider(t);
                    }
                }
                if d.z.abs() > 1e-15 {
                    for zc in [z0, z1] {
                        let t = (zc - o.z) / d.z;
                        let (x, y) = (o.x + t * d.x, o.y + t * d.y);
                        if x * x + y * y <= r * r {
                            consider(t);
                        }
                    }
                }
                best
            }
            Solid::Tube { r_out, r_in, z0, z1 } => {
                let mut best: Option<f64> = None;
                let mut consider = |t: f64| {
                    if t > T_MIN && best.is_none_or(|b| t < b) {
                        best = Some(t);
                    }
                };
                let in_z = |t: f64| {
                    let z = o.z + t * d.z;
                    z >= z0 && z <= z1
                };
                if let Some((t, _)) = side_roots(o, d, r_out) {
                    if in_z(t) {
                        consider(t);
                    }
                }
                // From inside the hole, the wall is entered where the ray
                // leaves the inner cylinder.
                if let Some((_, t)) = side_roots(o, d, r_in) {
                    if in_z(t) {
                        consider(t);
                    }
                }
                if d.z.abs() > 1e-15 {
                    for zc in [z0, z1] {
                        let t = (zc - o.z) / d.z;
                        let rho2 = (o.x + t * d.x).powi(2) + (o.y + t * d.y).powi(2);
                        if rho2 <= r_out * r_out && rho2 >= r_in * r_in {
                            consider(t);
                        }
                    }
                }
                best
            }
            Solid::Ball { r } => {
                let a = d.norm_squared();
                let b = 2.0 * o.dot(d);
                let c = o.norm_squared() - r * r;
                let disc = b * b - 4.0 * a * c;
                if disc < 0.0 {
                    return None;
                }
                let t = (-b - disc.sqrt()) / (2.0 * a);
                (t > T_MIN).then_some(t)
            }
        }
    }
}

/// Top-down outline in the object's local frame.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Footprint {
    Rect { hw: f64, hd: f64 },
    Circle { r: f64 },
}

impl Footprint {
    pub fn area(&self) -> f64 {
        match *self {
            Footprint::Rect { hw, hd } => 4.0 * hw * hd,
            Footprint::Circle { r } => std::f64::consts::PI * r * r,
        }
    }

    pub fn inflated(&self, margin: f64) -> Footprint {
        match *self {
            Footprint::Rect { hw, hd } => Footprint::Rect { hw: hw + margin, hd: hd + margin },
            Footprint::Circle { r } => Footprint::Circle { r: r + margin },
        }
    }

    fn contains_local(&self, x: f64, y: f64) -> bool {
        match *self {
            Footprint::Rect { hw, hd } => x.abs() <= hw && y.abs() <= hd,
            Footprint::Circle { r } => x * x + y * y <= r * r,
        }
    }

    fn half_box(&self) -> (f64, f64) {
        match *self {
            Footprint::Rect { hw, hd } => (hw, hd),
            Footprint::Circle { r } => (r, r),
        }
    }
}

/// A footprint placed in the table plane.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PlacedFootprint {
    pub center: [f64; 2],
    pub yaw: f64,
    pub shape: Footprint,
}

const SAMPLES: usize = 15;

impl PlacedFootprint {
    fn to_local(&self, x: f64, y: f64) -> (f64, f64) {
        let (dx, dy) = (x - self.center[0], y - self.center[1]);
        let (s, c) = self.yaw.sin_cos();
        (c * dx + s * dy, -s * dx + c * dy)
    }

    pub fn contains(&self, x: f64, y: f64) -> bool {
        let (lx, ly) = self.to_local(x, y);
        self.shape.contains_local(lx, ly)
    }

    fn samples(&self) -> Vec<(f64, f64)> {
        let (hx, hy) = self.shape.half_box();
        let (s, c) = self.yaw.sin_cos();
        let mut out = Vec::new();
        for i in 0..SAMPLES {
            for j in 0..SAMPLES {
                let lx = -hx + 2.0 * hx * (i as f64 + 0.5) / SAMPLES as f64;
                let ly = -hy + 2.0 * hy * (j as f64 + 0.5) / SAMPLES as f64;
                if self.shape.contains_local(lx, ly) {
                    out.push((self.center[0] + c * lx - s * ly, self.center[1] + s * lx + c * ly));
                }
            }
        }
        out
    }

    fn fraction_inside(&self, other: &PlacedFootprint) -> f64 {
        let pts = self.samples();
        if pts.is_empty() {
            return 0.0;
        }
        pts.iter().filter(|(x, y)| other.contains(*x, *y)).count() as f64 / pts.len() as f64
    }

    /// Sampled overlap as a fraction of the smaller footprint, in `[0, 1]`.
    pub fn overlap(&self, other: &PlacedFootprint) -> f64 {
        self.fraction_inside(other).max(other.fraction_inside(self))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn box_hit_from_above() {
        let s = Shape::Box { w: 0.1, d: 0.1, h: 0.1 }.solids(false)[0];
        let t = s.intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((t - 0.95).abs() < 1e-12);
    }

    #[test]
    fn hollow_box_shows_floor() {
        let solids = Shape::Box { w: 0.2, d: 0.2, h: 0.1 }.solids(true);
        let t = solids
            .iter()
            .filter_map(|s| s.intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0)))
            .fold(f64::INFINITY, f64::min);
        assert!((t - (1.0 + 0.05 - FLOOR)).abs() < 1e-12);
    }

    #[test]
    fn cylinder_side_and_cap() {
        let s = Solid::Cyl { r: 0.05, z0: -0.02, z1: 0.02 };
        let cap = s.intersect(&Vec3::new(0.0, 0.0, 1.0), &Vec3::new(0.0, 0.0, -1.0)).unwrap();
        assert!((cap - 0.98).abs() < 1e-12);
        let side = s.intersect(&Vec3::new(-1.0, 0.0, 0.0), &Vec3::new(1.0, 0.0, 0.0)).unwrap();
        assert!((side - 0.95).abs() < 1e-12);
        assert!(s.intersect(&Vec3::new(-1.0, 0.0, 0.5), &Vec3::new(1.0, 0.0, 0.0)).is_none());
    }

    #[test]
    fn tube_wall_and_hole() {
        let s = Solid::Tube { r_out: 0.1, r_in: 0.09, z0: -0.05, z1: 0.05 };
        let down = Vec3::new(0.0, 0.0, -1.0);
        // Straight down the hole misses the wall.
        assert!(s.intersect(&Vec3::new(0.0, 0.0, 1.0), &down).is_none());
        // Onto the rim.
        let t = s.intersect(&Vec3::new(0.095, 0.0, 1.0), &down).unwrap();
        assert!((t - 0.95).abs() < 1e-12);
        // Slanted ray through the opening hits the inner face.
        let d = Vec3::new(1.0, 0.0, -0.2).normalize();
        let t = s.intersect(&Vec3::new(0.0, 0.0, 0.04), &d).unwrap();
        let p = Vec3::new(0.0, 0.0, 0.04) + d * t;
        assert!((p.x - 0.09).abs() < 1e-12);
        // From the side, the outer face.
        let t = s.intersect(&Vec3::new(1.0, 0.0, 0.0), &Vec3::new(-1.0, 0.0, 0.0)).unwrap();
        assert!((t - 0.9).abs() < 1e-12);
    }

    #[test]
    fn sphere_hit() {
        let t = Solid::Ball { r: 0.5 }
            .intersect(&Vec3::new(0.0, 0.0, 2.0), &Vec3::new(0.0, 0.0, -1.0))
            .unwrap();
        assert!((t - 1.5).abs() < 1e-12);
    }

    #[test]
    fn footprint_overlap() {
        let a = PlacedFootprint { center: [0.0, 0.0], yaw: 0.0, shape: Footprint::Circle { r: 0.05 } };
        let b = PlacedFootprint { center: [0.2, 0.0], ..a };
        let c = PlacedFootprint { center: [0.0, 0.0], yaw: 0.3, shape: Footprint::Rect { hw: 0.2, hd: 0.2 } };
        assert_eq!(a.overlap(&b), 0.0);
        assert_eq!(a.overlap(&c), 1.0);
        assert!(c.contains(0.1, 0.1));
        assert!(!c.contains(0.3, 0.0));
    }
}

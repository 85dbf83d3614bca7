//! Synthetic depth capture by analytic ray casting.

use super::rng;
use super::world::WorldState;
use super::SimError;
use crate::geometry::{deproject, merge_views, project, BBox, CameraPose, DepthImage, PointCloud, Vec3};
use nalgebra::{Matrix3, Rotation3};
use rand_distr::{Distribution, Normal};

pub const TABLE_ID: i32 = -1;
pub const NO_HIT: i32 = -2;

const TOP_HEIGHT: f64 = 1.0;
const OBLIQUE_OFFSET: f64 = 0.35;
const OBLIQUE_HEIGHT: f64 = 0.9;

/// One camera frame of the simulated scene.
#[derive(Debug, Clone, PartialEq)]
pub struct CaptureResult {
    /// Sequence number of this capture within the world's lifetime.
    pub id: u64,
    pub view: usize,
    pub depth: DepthImage,
    pub pose: CameraPose,
    pub truth_bboxes: Vec<BBox>,
    pub visible: Vec<String>,
    /// Per-pixel index into `labels`, or [`TABLE_ID`] / [`NO_HIT`].
    pub ids: Vec<i32>,
    pub labels: Vec<String>,
}

impl CaptureResult {
    pub fn is_visible(&self, name: &str) -> bool {
        self.visible.iter().any(|v| v == name)
    }

    pub fn bbox(&self, name: &str) -> Option<&BBox> {
        self.truth_bboxes.iter().find(|b| b.label == name)
    }
}

struct Frame {
    depth: Vec<f64>,
    ids: Vec<i32>,
}

impl WorldState {
    /// Vantage poses: 0 looks straight down on the table center, 1 and 2
    /// look at it obliquely from either side.
    pub fn rig(&self) -> Vec<CameraPose> {
        let [cx, cy] = self.table_extent.center();
        let target = Vec3::new(cx, cy, self.table_z);
        let up = Vec3::new(0.0, 1.0, 0.0);
        let mut poses = vec![CameraPose::look_at(Vec3::new(cx, cy, self.table_z + TOP_HEIGHT), target, up)
            .expect("top-down pose")];
        for dx in [-OBLIQUE_OFFSET, OBLIQUE_OFFSET] {
            let eye = Vec3::new(cx + dx, cy, self.table_z + OBLIQUE_HEIGHT);
            poses.push(CameraPose::look_at(eye, target, up).expect("oblique pose"));
        }
        poses.truncate(self.config.views.clamp(1, 3));
        poses
    }

    fn pose(&self, view: usize) -> Result<CameraPose, SimError> {
        self.rig().get(view).copied().ok_or(SimError::UnknownView(view))
    }

    fn render(&self, pose: &CameraPose, only: Option<usize>) -> Frame {
        let intr = &self.config.intrinsics;
        let (w, h) = (intr.width, intr.height);
        let mut depth = vec![f64::INFINITY; w * h];
        let mut ids = vec![NO_HIT; w * h];
        let eye = *pose.translation();
        let rot = *pose.rotation();
        let ray = |u: usize, v: usize| rot * Vec3::new((u as f64 - intr.cx) / intr.fx, (v as f64 - intr.cy) / intr.fy, 1.0);

        if only.is_none() {
            for v in 0..h {
                for u in 0..w {
                    let d = ray(u, v);
                    if d.z < 0.0 {
                        let t = (self.table_z - eye.z) / d.z;
                        let p = eye + d * t;
                        if t > 0.0 && self.table_extent.contains(p.x, p.y) {
                            depth[v * w + u] = t;
                            ids[v * w + u] = TABLE_ID;
                        }
                    }
                }
            }
        }

        for (idx, obj) in self.objects.values().enumerate() {
            if self.is_held(&obj.name) || only.is_some_and(|o| o != idx) {
                continue;
            }
            let center = Vec3::from(obj.position);
            let to_local: Matrix3<f64> = Rotation3::from_axis_angle(&Vec3::z_axis(), -obj.yaw).into_inner();
            let solids = obj.shape.solids(obj.container);
            let (us, vs) = pixel_rect(pose, intr, &center, &obj.shape.half_extents(), obj.yaw);
            let o_local = to_local * (eye - center);
            for v in vs {
                for u in us.clone() {
                    let d_local = to_local * ray(u, v);
                    let t = solids
                        .iter()
                        .filter_map(|s| s.intersect(&o_local, &d_local))
                        .fold(f64::INFINITY, f64::min);
                    let k = v * w + u;
                    if t < depth[k] {
                        depth[k] = t;
                        ids[k] = idx as i32;
                    }
                }
            }
        }
        for d in &mut depth {
            if !d.is_finite() {
                *d = 0.0;
            }
        }
        Frame { depth, ids }
    }

    fn frame_to_capture(&self, id: u64, view: usize, pose: CameraPose, frame: Frame, noise: Option<u64>) -> CaptureResult {
        let intr = self.config.intrinsics;
        let labels: Vec<String> = self.objects.keys().cloned().collect();
        let w = intr.width;
        let mut visible = Vec::new();
        let mut truth_bboxes = Vec::new();
        for (idx, obj) in self.objects.values().enumerate() {
            if self.is_held(&obj.name)
                || self.covering(&obj.name).is_some()
                || self.enclosing_closed_container(&obj.name).is_some()
            {
                continue;
            }
            let mut count = 0usize;
            let (mut x0, mut y0, mut x1, mut y1) = (usize::MAX, usize::MAX, 0, 0);
            for (k, _) in frame.ids.iter().enumerate().filter(|(_, i)| **i == idx as i32) {
                count += 1;
                let (u, v) = (k % w, k / w);
                x0 = x0.min(u);
                y0 = y0.min(v);
                x1 = x1.max(u);
                y1 = y1.max(v);
            }
            if count == 0 {
                continue;
            }
            let alone = self.render(&pose, Some(idx)).ids.iter().filter(|i| **i == idx as i32).count();
            if (count as f64) < self.config.min_visible_fraction * alone as f64 {
                continue;
            }
            visible.push(obj.name.clone());
            truth_bboxes.push(
                BBox::new(obj.name.clone(), x0 as i32, y0 as i32, x1 as i32 + 1, y1 as i32 + 1).expect("non-empty extent"),
            );
        }
        let mut depths: Vec<f32> = frame.depth.iter().map(|d| *d as f32).collect();
        if let Some(seed) = noise {
            let sigma = self.config.depth_noise;
            if sigma > 0.0 {
                let mut r = rng::stream(seed, &[rng::DEPTH_NOISE, id, view as u64]);
                let normal = Normal::new(0.0, sigma).expect("finite sigma");
                for d in depths.iter_mut().filter(|d| **d > 0.0) {
                    *d = (*d as f64 + normal.sample(&mut r)).max(1e-4) as f32;
                }
            }
        }
        CaptureResult {
            id,
            view,
            depth: DepthImage::new(intr, depths).expect("rendered depths are valid"),
            pose,
            truth_bboxes,
            visible,
            ids: frame.ids,
            labels,
        }
    }

    /// Takes a picture from vantage `view`, with configured depth noise and
    /// injected dropouts. Requires an empty gripper.
    pub fn capture(&mut self, view: usize) -> Result<CaptureResult, SimError> {
        if self.gripper.is_some() {
            return Err(SimError::GripperOccupiedDuringCapture);
        }
        let pose = self.pose(view)?;
        if self.faults.take_capture_dropout() {
            return Err(SimError::CaptureDropout);
        }
        let id = self.captures;
        self.captures += 1;
        let frame = self.render(&pose, None);
        Ok(self.frame_to_capture(id, view, pose, frame, Some(self.seed())))
    }

    /// Noise-free capture that leaves the world untouched.
    pub fn capture_clean(&self, view: usize) -> Result<CaptureResult, SimError> {
        if self.gripper.is_some() {
            return Err(SimError::GripperOccupiedDuringCapture);
        }
        let pose = self.pose(view)?;
        let frame = self.render(&pose, None);
        Ok(self.frame_to_capture(self.captures, view, pose, frame, None))
    }

    /// Tag ids with the top-center of every uncovered tagged object, sorted
    /// by id.
    pub fn read_apriltags(&self) -> Result<Vec<(u32, [f64; 3])>, SimError> {
        if self.gripper.is_some() {
            return Err(SimError::GripperOccupiedDuringCapture);
        }
        let mut tags: Vec<(u32, [f64; 3])> = self
            .resting()
            .filter(|o| self.covering(&o.name).is_none() && self.enclosing_closed_container(&o.name).is_none())
            .filter_map(|o| o.tag.map(|t| (t, [o.position[0], o.position[1], o.top()])))
            .collect();
        tags.sort_by_key(|(t, _)| *t);
        Ok(tags)
    }

    /// Ground-truth target for perception: the mean of the object's
    /// noise-free surface points over every vantage view, keeping points
    /// more than `band` above the table and merging views as perception does.
    pub fn visible_surface_centroid(&self, name: &str, voxel: f64, band: f64) -> Option<[f64; 3]> {
        let idx = self.objects.get_index_of(name)? as i32;
        let intr = self.config.intrinsics;
        let clouds: Vec<PointCloud> = self
            .rig()
            .iter()
            .map(|pose| {
                let f = self.render(pose, None);
                let pts = f
                    .ids
                    .iter()
                    .enumerate()
                    .filter(|(_, i)| **i == idx)
                    .filter_map(|(k, _)| {
                        let (u, v) = (k % intr.width, k / intr.width);
                        deproject((u as f64, v as f64), f.depth[k], &intr, pose).ok()
                    })
                    .filter(|p: &Vec3| p.z > self.table_z + band)
                    .collect();
                PointCloud::new(pts)
            })
            .collect();
        let merged = merge_views(&clouds, voxel);
        crate::geometry::centroid(&merged).ok().map(|c| [c.x, c.y, c.z])
    }

    /// Pixel at which `p` appears from `view`.
    pub fn project_to(&self, view: usize, p: [f64; 3]) -> Result<(f64, f64), SimError> {
        let pose = self.pose(view)?;
        project(&Vec3::from(p), &self.config.intrinsics, &pose).map_err(|e| SimError::InvalidWorld(e.to_string()))
    }
}

/// Pixel range covering a yawed box of `half` extents around `center`.
fn pixel_rect(
    pose: &CameraPose,
    intr: &crate::geometry::CameraIntrinsics,
    center: &Vec3,
    half: &Vec3,
    yaw: f64,
) -> (std::ops::Range<usize>, std::ops::Range<usize>) {
    let full = (0..intr.width, 0..intr.height);
    let rot = Rotation3::from_axis_angle(&Vec3::z_axis(), yaw);
    let (mut u0, mut v0, mut u1, mut v1) = (f64::INFINITY, f64::INFINITY, f64::NEG_INFINITY, f64::NEG_INFINITY);
    for sx in [-1.0, 1.0] {
        for sy in [-1.0, 1.0] {
            for sz in [-1.0, 1.0] {
                let corner = center + rot * Vec3::new(sx * half.x, sy * half.y, sz * half.z);
                let Ok((u, v)) = project(&corner, intr, pose) else {
                    return full;
                };
                u0 = u0.min(u);
                v0 = v0.min(v);
                u1 = u1.max(u);
                v1 = v1.max(v);
            }
        }
    }
    let clamp = |x: f64, hi: usize| x.clamp(0.0, hi as f64) as usize;
    (
        clamp(u0.floor() - 1.0, intr.width)..clamp(u1.ceil() + 2.0, intr.width),
        clamp(v0.floor() - 1.0, intr.height)..clamp(v1.ceil() + 2.0, intr.height),
    )
}

fn color_rgb(name: &str) -> [u8; 3] {
    match name {
        "red" => [200, 30, 30],
        "orange" => [240, 140, 20],
        "yellow" => [235, 220, 40],
        "green" => [40, 170, 60],
        "blue" => [40, 80, 210],
        "purple" => [130, 50, 170],
        "white" => [245, 245, 245],
        "black" => [20, 20, 20],
        "brown" => [120, 80, 40],
        "grey" | "gray" => [128, 128, 128],
        "pink" => [240, 150, 180],
        other => {
            let h = rng::name_tag(other);
            [(h >> 16) as u8, (h >> 8) as u8, h as u8]
        }
    }
}

/// Flat-shaded color rendering of a capture, PNG encoded.
pub fn rgb_png(world: &WorldState, capture: &CaptureResult) -> Vec<u8> {
    use image::{ImageEncoder, RgbImage};
    let (w, h) = (capture.depth.width(), capture.depth.height());
    let mut img = RgbImage::new(w as u32, h as u32);
    for (k, id) in capture.ids.iter().enumerate() {
        let px = match *id {
            TABLE_ID => [170, 150, 120],
            NO_HIT => [0, 0, 0],
            i => capture
                .labels
                .get(i as usize)
                .and_then(|n| world.objects.get(n))
                .map(|o| color_rgb(&o.color))
                .unwrap_or([255, 0, 255]),
        };
        img.put_pixel((k % w) as u32, (k / w) as u32, image::Rgb(px));
    }
    let mut out = Vec::new();
    image::codecs::png::PngEncoder::new(&mut out)
        .write_image(img.as_raw(), w as u32, h as u32, image::ExtendedColorType::Rgb8)
        .expect("in-memory PNG encoding");
    out
}

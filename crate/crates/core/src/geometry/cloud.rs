use super::camera::{deproject, CameraIntrinsics, CameraPose};
use super::{GeometryError, Vec3};
use serde::{Deserialize, Serialize};
use std::collections::HashMap;

/// Row-major depth grid in meters. `0` marks a missing measurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DepthImage {
    pub intrinsics: CameraIntrinsics,
    depths: Vec<f32>,
}

impl DepthImage {
    pub fn new(intrinsics: CameraIntrinsics, depths: Vec<f32>) -> Result<Self, GeometryError> {
        intrinsics.validate()?;
        if depths.len() != intrinsics.width * intrinsics.height {
            return Err(GeometryError::SizeMismatch {
                expected: intrinsics.width * intrinsics.height,
                got: depths.len(),
            });
        }
        if depths.iter().any(|d| !d.is_finite() || *d < 0.0) {
            return Err(GeometryError::InvalidDepthValue);
        }
        Ok(Self { intrinsics, depths })
    }

    pub fn width(&self) -> usize {
        self.intrinsics.width
    }

    pub fn height(&self) -> usize {
        self.intrinsics.height
    }

    pub fn depths(&self) -> &[f32] {
        &self.depths
    }

    pub fn at(&self, u: usize, v: usize) -> f32 {
        self.depths[v * self.intrinsics.width + u]
    }

    /// Deprojects the stored depth at integer pixel `(u, v)`.
    pub fn deproject_pixel(&self, u: usize, v: usize, pose: &CameraPose) -> Result<Vec3, GeometryError> {
        if u >= self.width() || v >= self.height() {
            return Err(GeometryError::OutOfBounds { u: u as f64, v: v as f64 });
        }
        deproject((u as f64, v as f64), self.at(u, v) as f64, &self.intrinsics, pose)
    }

    /// Every valid pixel, deprojected.
    pub fn to_cloud(&self, pose: &CameraPose) -> PointCloud {
        let mut points = Vec::new();
        for v in 0..self.height() {
            for u in 0..self.width() {
                if let Ok(p) = self.deproject_pixel(u, v, pose) {
                    points.push(p);
                }
            }
        }
        PointCloud::new(points)
    }
}

/// Axis-aligned pixel box; `x_max`/`y_max` are exclusive.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct BBox {
    pub label: String,
    pub x_min: i32,
    pub y_min: i32,
    pub x_max: i32,
    pub y_max: i32,
}

impl BBox {
    pub fn new(label: impl Into<String>, x_min: i32, y_min: i32, x_max: i32, y_max: i32) -> Result<Self, GeometryError> {
        if x_min >= x_max || y_min >= y_max {
            return Err(GeometryError::InvalidBBox);
        }
        Ok(Self {
            label: label.into(),
            x_min,
            y_min,
            x_max,
            y_max,
        })
    }

    pub fn center(&self) -> (f64, f64) {
        (
            (self.x_min + self.x_max) as f64 / 2.0,
            (self.y_min + self.y_max) as f64 / 2.0,
        )
    }

    pub fn area(&self) -> i64 {
        (self.x_max - self.x_min) as i64 * (self.y_max - self.y_min) as i64
    }

    /// Pixel ranges after clamping to a `width x height` image, or `None`
    /// when nothing of the box remains.
    pub fn clamped(&self, width: usize, height: usize) -> Option<(std::ops::Range<usize>, std::ops::Range<usize>)> {
        let clamp = |v: i32, hi: usize| v.clamp(0, hi as i32) as usize;
        let xs = clamp(self.x_min, width)..clamp(self.x_max, width);
        let ys = clamp(self.y_min, height)..clamp(self.y_max, height);
        (!xs.is_empty() && !ys.is_empty()).then_some((xs, ys))
    }
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct PointCloud {
    pub points: Vec<Vec3>,
}

impl PointCloud {
    pub fn new(points: Vec<Vec3>) -> Self {
        Self { points }
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn transformed(&self, pose: &CameraPose) -> PointCloud {
        PointCloud::new(self.points.iter().map(|p| pose.to_base(p)).collect())
    }
}

/// Points behind a pixel box.
pub fn bbox_to_cloud(bbox: &BBox, depth: &DepthImage, pose: &CameraPose) -> Result<PointCloud, GeometryError> {
    let (xs, ys) = bbox
        .clamped(depth.width(), depth.height())
        .ok_or(GeometryError::EmptyCloud)?;
    let mut points = Vec::with_capacity(xs.len() * ys.len());
    for v in ys {
        for u in xs.clone() {
            if let Ok(p) = depth.deproject_pixel(u, v, pose) {
                points.push(p);
            }
        }
    }
    if points.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud::new(points))
}

fn voxel_key(p: &Vec3, size: f64) -> (i64, i64, i64) {
    (
        (p.x / size).floor() as i64,
        (p.y / size).floor() as i64,
        (p.z / size).floor() as i64,
    )
}

/// Concatenates clouds, dropping every point that falls in a voxel already
/// occupied by an earlier cloud. Points of one cloud never suppress each
/// other, so a single view passes through unchanged and zero-mean depth
/// noise does not shift the weight between surfaces.
pub fn merge_views(clouds: &[PointCloud], voxel: f64) -> PointCloud {
    let mut owner: HashMap<(i64, i64, i64), usize> = HashMap::new();
    let mut points = Vec::new();
    for (ci, cloud) in clouds.iter().enumerate() {
        for p in &cloud.points {
            if *owner.entry(voxel_key(p, voxel)).or_insert(ci) == ci {
                points.push(*p);
            }
        }
    }
    PointCloud::new(points)
}

/// Uniform grid over a point set for radius and k-nearest queries.
struct Grid<'a> {
    points: &'a [Vec3],
    cell: f64,
    cells: HashMap<(i64, i64, i64), Vec<usize>>,
    lo: (i64, i64, i64),
    hi: (i64, i64, i64),
}

impl<'a> Grid<'a> {
    fn new(points: &'a [Vec3], cell: f64) -> Self {
        let mut cells: HashMap<_, Vec<usize>> = HashMap::new();
        let mut lo = (i64::MAX, i64::MAX, i64::MAX);
        let mut hi = (i64::MIN, i64::MIN, i64::MIN);
        for (i, p) in points.iter().enumerate() {
            let k = voxel_key(p, cell);
            lo = (lo.0.min(k.0), lo.1.min(k.1), lo.2.min(k.2));
            hi = (hi.0.max(k.0), hi.1.max(k.1), hi.2.max(k.2));
            cells.entry(k).or_default().push(i);
        }
        Self { points, cell, cells, lo, hi }
    }

    /// Indices of points within `radius` of `q` (`radius <= cell`).
    fn within(&self, q: &Vec3, radius: f64, out: &mut Vec<usize>) {
        out.clear();
        let (cx, cy, cz) = voxel_key(q, self.cell);
        let r2 = radius * radius;
        for dx in -1..=1 {
            for dy in -1..=1 {
                for dz in -1..=1 {
                    if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                        out.extend(ids.iter().copied().filter(|&j| (self.points[j] - q).norm_squared() <= r2));
                    }
                }
            }
        }
    }

    /// Sorted distances to the `k` nearest points other than `skip`.
    fn knn_distances(&self, q: &Vec3, k: usize, skip: usize) -> Vec<f64> {
        let (cx, cy, cz) = voxel_key(q, self.cell);
        let max_ring = [
            (cx - self.lo.0).abs(),
            (self.hi.0 - cx).abs(),
            (cy - self.lo.1).abs(),
            (self.hi.1 - cy).abs(),
            (cz - self.lo.2).abs(),
            (self.hi.2 - cz).abs(),
        ]
        .into_iter()
        .max()
        .unwrap_or(0);
        let mut found: Vec<f64> = Vec::new();
        for ring in 0..=max_ring {
            for dx in -ring..=ring {
                for dy in -ring..=ring {
                    for dz in -ring..=ring {
                        if dx.abs().max(dy.abs()).max(dz.abs()) != ring {
                            continue;
                        }
                        if let Some(ids) = self.cells.get(&(cx + dx, cy + dy, cz + dz)) {
                            found.extend(
                                ids.iter()
                                    .filter(|&&j| j != skip)
                                    .map(|&j| (self.points[j] - q).norm()),
                            );
                        }
                    }
                }
            }
            // Everything within ring * cell of q has been visited.
            if found.len() >= k {
                found.sort_by(f64::total_cmp);
                if found[k - 1] <= ring as f64 * self.cell {
                    found.truncate(k);
                    return found;
                }
            }
        }
        found.sort_by(f64::total_cmp);
        found.truncate(k);
        found
    }
}

/// Table-band and statistical outlier filter settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlaneFilter {
    pub table_z: f64,
    pub z_epsilon: f64,
    pub outlier_k: usize,
    pub outlier_sigma: f64,
}

/// Drops everything within `z_epsilon` above the table, then every point
/// whose mean distance to its `outlier_k` nearest neighbours exceeds the
/// cloud-wide mean by more than `outlier_sigma` standard deviations.
pub fn remove_plane_and_outliers(cloud: &PointCloud, filter: &PlaneFilter) -> Result<PointCloud, GeometryError> {
    let above: Vec<Vec3> = cloud
        .points
        .iter()
        .copied()
        .filter(|p| p.z > filter.table_z + filter.z_epsilon)
        .collect();
    if above.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    let k = filter.outlier_k.min(above.len() - 1);
    if k == 0 {
        return Ok(PointCloud::new(above));
    }
    let mean_d = mean_knn_distances(&above, k);
    let n = mean_d.len() as f64;
    let mu = mean_d.iter().sum::<f64>() / n;
    let sd = (mean_d.iter().map(|d| (d - mu).powi(2)).sum::<f64>() / n).sqrt();
    let limit = mu + filter.outlier_sigma * sd;
    let kept: Vec<Vec3> = above
        .iter()
        .zip(&mean_d)
        .filter(|(_, d)| **d <= limit)
        .map(|(p, _)| *p)
        .collect();
    if kept.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(PointCloud::new(kept))
}

fn mean_knn_distances(points: &[Vec3], k: usize) -> Vec<f64> {
    let cell = grid_cell_for(points);
    let grid = Grid::new(points, cell);
    points
        .iter()
        .enumerate()
        .map(|(i, p)| {
            let d = grid.knn_distances(p, k, i);
            d.iter().sum::<f64>() / d.len() as f64
        })
        .collect()
}

// Roughly a few points per cell for surface-like clouds.
fn grid_cell_for(points: &[Vec3]) -> f64 {
    let (mut lo, mut hi) = (points[0], points[0]);
    for p in points {
        lo = lo.inf(p);
        hi = hi.sup(p);
    }
    let extent = (hi - lo).norm().max(1e-6);
    (extent / (points.len() as f64).sqrt()).max(1e-4)
}

/// Connected components of the `link_distance` neighbourhood graph, as index
/// lists, in order of each component's lowest index. Includes components of
/// any size.
pub fn component_indices(cloud: &PointCloud, link_distance: f64) -> Vec<Vec<usize>> {
    let n = cloud.len();
    let mut uf = UnionFind::new(n);
    let grid = Grid::new(&cloud.points, link_distance);
    let mut near = Vec::new();
    for (i, p) in cloud.points.iter().enumerate() {
        grid.within(p, link_distance, &mut near);
        for &j in &near {
            if j > i {
                uf.union(i, j);
            }
        }
    }
    let mut by_root: HashMap<usize, usize> = HashMap::new();
    let mut groups: Vec<Vec<usize>> = Vec::new();
    for i in 0..n {
        let r = uf.find(i);
        let g = *by_root.entry(r).or_insert_with(|| {
            groups.push(Vec::new());
            groups.len() - 1
        });
        groups[g].push(i);
    }
    groups
}

/// Euclidean clusters with at least `min_points` members, ordered by
/// ascending centroid x, then y, then z.
pub fn cluster(cloud: &PointCloud, link_distance: f64, min_points: usize) -> Vec<PointCloud> {
    let mut clusters: Vec<(Vec3, PointCloud)> = component_indices(cloud, link_distance)
        .into_iter()
        .filter(|g| g.len() >= min_points)
        .map(|g| {
            let pc = PointCloud::new(g.into_iter().map(|i| cloud.points[i]).collect());
            (mean(&pc.points), pc)
        })
        .collect();
    clusters.sort_by(|(a, _), (b, _)| {
        a.x.total_cmp(&b.x)
            .then(a.y.total_cmp(&b.y))
            .then(a.z.total_cmp(&b.z))
    });
    clusters.into_iter().map(|(_, c)| c).collect()
}

pub struct UnionFind {
    parent: Vec<usize>,
    rank: Vec<u8>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            rank: vec![0; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra == rb {
            return;
        }
        match self.rank[ra].cmp(&self.rank[rb]) {
            std::cmp::Ordering::Less => self.parent[ra] = rb,
            std::cmp::Ordering::Greater => self.parent[rb] = ra,
            std::cmp::Ordering::Equal => {
                self.parent[rb] = ra;
                self.rank[ra] += 1;
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct ClusterMatch {
    pub index: usize,
    pub score: f64,
    pub cloud: PointCloud,
}

/// Fraction of `cluster` points lying within `tolerance` of some point of
/// `reference`.
pub fn overlap_score(cluster: &PointCloud, reference: &PointCloud, tolerance: f64) -> f64 {
    if cluster.is_empty() || reference.is_empty() {
        return 0.0;
    }
    let grid = Grid::new(&reference.points, tolerance);
    let mut near = Vec::new();
    let hits = cluster
        .points
        .iter()
        .filter(|p| {
            grid.within(p, tolerance, &mut near);
            !near.is_empty()
        })
        .count();
    hits as f64 / cluster.len() as f64
}

/// Picks the cluster best covered by the box cloud. Ties go to the nearest
/// centroid, then to the earlier cluster.
pub fn match_cluster(
    clusters: &[PointCloud],
    bbox_cloud: &PointCloud,
    tolerance: f64,
    floor: f64,
) -> Result<ClusterMatch, GeometryError> {
    if clusters.is_empty() || bbox_cloud.is_empty() {
        return Err(GeometryError::NoMatch { best: 0.0 });
    }
    let target = mean(&bbox_cloud.points);
    let mut best: Option<(usize, f64, f64)> = None;
    for (i, c) in clusters.iter().enumerate() {
        let score = overlap_score(c, bbox_cloud, tolerance);
        let dist = (mean(&c.points) - target).norm();
        let better = match best {
            None => true,
            Some((_, s, d)) => score > s || (score == s && dist < d),
        };
        if better {
            best = Some((i, score, dist));
        }
    }
    let (index, score, _) = best.expect("non-empty");
    if score < floor {
        return Err(GeometryError::NoMatch { best: score });
    }
    Ok(ClusterMatch {
        index,
        score,
        cloud: clusters[index].clone(),
    })
}

fn mean(points: &[Vec3]) -> Vec3 {
    points.iter().fold(Vec3::zeros(), |acc, p| acc + p) / points.len() as f64
}

pub fn centroid(cloud: &PointCloud) -> Result<Vec3, GeometryError> {
    if cloud.is_empty() {
        return Err(GeometryError::EmptyCloud);
    }
    Ok(mean(&cloud.points))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn flat_depth(value: f32) -> DepthImage {
        let intr = CameraIntrinsics::new(100.0, 100.0, 20.0, 20.0, 40, 40).unwrap();
        DepthImage::new(intr, vec![value; 1600]).unwrap()
    }

    #[test]
    fn uniform_patch_gives_flat_cloud() {
        let depth = flat_depth(0.75);
        let bbox = BBox::new("patch", 5, 5, 15, 15).unwrap();
        let cloud = bbox_to_cloud(&bbox, &depth, &CameraPose::identity()).unwrap();
        assert_eq!(cloud.len(), 100);
        assert!(cloud.points.iter().all(|p| (p.z - 0.75).abs() < 1e-9));
    }

    #[test]
    fn zero_depth_box_is_empty() {
        let depth = flat_depth(0.0);
        let bbox = BBox::new("patch", 5, 5, 15, 15).unwrap();
        assert_eq!(
            bbox_to_cloud(&bbox, &depth, &CameraPose::identity()),
            Err(GeometryError::EmptyCloud)
        );
    }

    #[test]
    fn bbox_validation_and_clamp() {
        assert!(BBox::new("x", 5, 1, 5, 3).is_err());
        let b = BBox::new("x", -4, -4, 10, 50).unwrap();
        let (xs, ys) = b.clamped(40, 40).unwrap();
        assert_eq!((xs, ys), (0..10, 0..40));
        assert!(BBox::new("x", 50, 50, 60, 60).unwrap().clamped(40, 40).is_none());
    }

    #[test]
    fn merge_dedups_identical_and_keeps_disjoint() {
        let a = PointCloud::new((0..10).map(|i| Vec3::new(i as f64 * 0.1, 0.0, 0.0)).collect());
        let b = PointCloud::new((0..10).map(|i| Vec3::new(i as f64 * 0.1, 1.0, 0.0)).collect());
        assert!(merge_views(&[a.clone(), a.clone()], 0.005).len() <= a.len());
        assert_eq!(merge_views(&[a.clone(), b.clone()], 0.005).len(), 20);
    }

    #[test]
    fn plane_band_keeps_cube() {
        let mut pts = Vec::new();
        for i in 0..20 {
            for j in 0..20 {
                pts.push(Vec3::new(i as f64 * 0.01, j as f64 * 0.01, 0.0));
            }
        }
        for i in 0..5 {
            for j in 0..5 {
                for k in 0..5 {
                    pts.push(Vec3::new(0.05 + i as f64 * 0.01, 0.05 + j as f64 * 0.01, 0.02 + k as f64 * 0.01));
                }
            }
        }
        let cloud = PointCloud::new(pts);
        let loose = PlaneFilter { table_z: 0.0, z_epsilon: 0.01, outlier_k: 8, outlier_sigma: 10.0 };
        let out = remove_plane_and_outliers(&cloud, &loose).unwrap();
        assert_eq!(out.len(), 125);
        // At 2 sigma the lattice corners, with the sparsest neighbourhoods, go too.
        let strict = PlaneFilter { outlier_sigma: 2.0, ..loose };
        let out = remove_plane_and_outliers(&cloud, &strict).unwrap();
        assert!(out.len() > 100 && out.points.iter().all(|p| p.z >= 0.02 - 1e-12));
    }

    #[test]
    fn all_plane_is_empty() {
        let pts = (0..10).map(|i| Vec3::new(i as f64, 0.0, 0.005)).collect();
        let filter = PlaneFilter { table_z: 0.0, z_epsilon: 0.01, outlier_k: 8, outlier_sigma: 2.0 };
        assert_eq!(
            remove_plane_and_outliers(&PointCloud::new(pts), &filter),
            Err(GeometryError::EmptyCloud)
        );
    }

    #[test]
    fn two_blobs_two_clusters() {
        let mut pts = Vec::new();
        for i in 0..30 {
            let t = i as f64 * 0.001;
            pts.push(Vec3::new(t, 0.0, 0.1));
            pts.push(Vec3::new(0.2 + t, 0.0, 0.1));
        }
        let cloud = PointCloud::new(pts);
        let cs = cluster(&cloud, 0.05, 5);
        assert_eq!(cs.len(), 2);
        assert!(cs[0].points[0].x < cs[1].points[0].x);
        let one = PointCloud::new(cloud.points[..30].to_vec());
        let single = cluster(&PointCloud::new(one.points.iter().step_by(2).copied().collect()), 0.05, 1);
        assert_eq!(single.len(), 1);
    }

    #[test]
    fn match_prefers_overlap() {
        let a = PointCloud::new((0..20).map(|i| Vec3::new(i as f64 * 0.002, 0.0, 0.1)).collect());
        let b = PointCloud::new((0..20).map(|i| Vec3::new(1.0 + i as f64 * 0.002, 0.0, 0.1)).collect());
        let m = match_cluster(&[a.clone(), b.clone()], &a, 0.005, 0.2).unwrap();
        assert_eq!(m.index, 0);
        assert_eq!(m.score, 1.0);
        let m = match_cluster(&[b.clone(), a.clone()], &a, 0.005, 0.2).unwrap();
        assert_eq!(m.index, 1);
        assert!(matches!(match_cluster(&[b], &a, 0.005, 0.2), Err(GeometryError::NoMatch { .. })));
    }

    #[test]
    fn centroid_cases() {
        let p = Vec3::new(0.3, -0.2, 0.1);
        let sym = PointCloud::new(vec![p + Vec3::new(0.01, 0.0, 0.0), p - Vec3::new(0.01, 0.0, 0.0), p + Vec3::new(0.0, 0.02, 0.0), p - Vec3::new(0.0, 0.02, 0.0)]);
        assert!((centroid(&sym).unwrap() - p).norm() < 1e-12);
        assert_eq!(centroid(&PointCloud::new(vec![p])).unwrap(), p);
        assert_eq!(centroid(&PointCloud::default()), Err(GeometryError::EmptyCloud));
    }
}

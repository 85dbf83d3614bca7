//! Perception geometry.
//!
//! Two localization pathways are supported:
//!
//! * box pathway: pixel box -> box point cloud; multi-view scene cloud ->
//!   table-band and outlier removal -> Euclidean clusters -> the cluster best
//!   covered by the box cloud -> its centroid;
//! * point pathway: a single pixel deprojected through the depth map.
//!
//! Every function here is pure.

mod camera;
mod cloud;
pub mod depth_io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use camera::{deproject, project, CameraIntrinsics, CameraPose};
pub use cloud::{
    bbox_to_cloud, centroid, cluster, component_indices, match_cluster, merge_views,
    overlap_score, remove_plane_and_outliers, BBox, ClusterMatch, DepthImage, PlaneFilter,
    PointCloud, UnionFind,
};

pub type Vec3 = nalgebra::Vector3<f64>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum GeometryError {
    #[error("invalid depth at pixel ({u}, {v})")]
    InvalidDepth { u: f64, v: f64 },
    #[error("pixel ({u}, {v}) is outside the image")]
    OutOfBounds { u: f64, v: f64 },
    #[error("point is behind the camera")]
    BehindCamera,
    #[error("invalid camera intrinsics")]
    InvalidIntrinsics,
    #[error("camera rotation is not a proper orthonormal matrix")]
    InvalidPose,
    #[error("depth grid has {got} values, expected {expected}")]
    SizeMismatch { expected: usize, got: usize },
    #[error("depth values must be finite and non-negative")]
    InvalidDepthValue,
    #[error("bounding box has non-positive extent")]
    InvalidBBox,
    #[error("point cloud is empty")]
    EmptyCloud,
    #[error("no cluster matches the box cloud (best overlap {best:.3})")]
    NoMatch { best: f64 },
    #[error("depth file: {0}")]
    Io(String),
}

/// Tunables of the box pathway.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct PerceptionConfig {
    pub voxel: f64,
    pub link_distance: f64,
    pub min_points: usize,
    pub z_epsilon: f64,
    pub outlier_k: usize,
    pub outlier_sigma: f64,
    pub match_floor: f64,
}

impl Default for PerceptionConfig {
    fn default() -> Self {
        Self {
            voxel: 0.005,
            link_distance: 0.02,
            min_points: 20,
            z_epsilon: 0.01,
            outlier_k: 8,
            outlier_sigma: 4.0,
            match_floor: 0.2,
        }
    }
}

/// Segmented scene built once per scan from every vantage view.
#[derive(Debug, Clone)]
pub struct SegmentedScene {
    pub clusters: Vec<PointCloud>,
}

impl SegmentedScene {
    pub fn build(
        views: &[(DepthImage, CameraPose)],
        table_z: f64,
        cfg: &PerceptionConfig,
    ) -> Result<Self, GeometryError> {
        let clouds: Vec<PointCloud> = views.iter().map(|(d, p)| d.to_cloud(p)).collect();
        let merged = merge_views(&clouds, cfg.voxel);
        let filter = PlaneFilter {
            table_z,
            z_epsilon: cfg.z_epsilon,
            outlier_k: cfg.outlier_k,
            outlier_sigma: cfg.outlier_sigma,
        };
        let objects = remove_plane_and_outliers(&merged, &filter)?;
        Ok(Self {
            clusters: cluster(&objects, cfg.link_distance, cfg.min_points),
        })
    }

    /// Centroid of the cluster matched to `bbox` as seen in `view`.
    pub fn localize(
        &self,
        bbox: &BBox,
        view: &(DepthImage, CameraPose),
        cfg: &PerceptionConfig,
    ) -> Result<Vec3, GeometryError> {
        let box_cloud = bbox_to_cloud(bbox, &view.0, &view.1)?;
        let m = match_cluster(&self.clusters, &box_cloud, cfg.voxel, cfg.match_floor)?;
        centroid(&m.cloud)
    }
}

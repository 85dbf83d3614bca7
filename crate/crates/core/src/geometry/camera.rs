use super::{GeometryError, Vec3};
use nalgebra::Matrix3;
use serde::{Deserialize, Serialize};

/// Pinhole intrinsics. Pixel centers sit at integer coordinates.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CameraIntrinsics {
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub width: usize,
    pub height: usize,
}

impl CameraIntrinsics {
    pub fn new(fx: f64, fy: f64, cx: f64, cy: f64, width: usize, height: usize) -> Result<Self, GeometryError> {
        let intr = Self { fx, fy, cx, cy, width, height };
        intr.validate()?;
        Ok(intr)
    }

    pub fn validate(&self) -> Result<(), GeometryError> {
        let ok = self.fx > 0.0
            && self.fy > 0.0
            && self.cx >= 0.0
            && self.cx < self.width as f64
            && self.cy >= 0.0
            && self.cy < self.height as f64;
        if ok {
            Ok(())
        } else {
            Err(GeometryError::InvalidIntrinsics)
        }
    }

    pub fn contains(&self, u: f64, v: f64) -> bool {
        u >= 0.0 && v >= 0.0 && u < self.width as f64 && v < self.height as f64
    }
}

impl Default for CameraIntrinsics {
    /// 320x240 with a 300 px focal length.
    fn default() -> Self {
        Self {
            fx: 300.0,
            fy: 300.0,
            cx: 160.0,
            cy: 120.0,
            width: 320,
            height: 240,
        }
    }
}

/// Camera-to-base rigid transform: `p_base = rotation * p_cam + translation`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CameraPose {
    rotation: Matrix3<f64>,
    translation: Vec3,
}

const ORTHO_TOL: f64 = 1e-9;

impl CameraPose {
    pub fn new(rotation: Matrix3<f64>, translation: Vec3) -> Result<Self, GeometryError> {
        let gram = rotation.transpose() * rotation;
        let ortho = (gram - Matrix3::identity()).abs().max() <= ORTHO_TOL;
        let det = (rotation.determinant() - 1.0).abs() <= ORTHO_TOL;
        if !ortho || !det || !translation.iter().all(|v| v.is_finite()) {
            return Err(GeometryError::InvalidPose);
        }
        Ok(Self { rotation, translation })
    }

    pub fn identity() -> Self {
        Self {
            rotation: Matrix3::identity(),
            translation: Vec3::zeros(),
        }
    }

    /// Camera at `eye` with its optical axis through `target`. Image rows run
    /// along `optical_axis x (optical_axis x up)`.
    pub fn look_at(eye: Vec3, target: Vec3, up: Vec3) -> Result<Self, GeometryError> {
        let z = (target - eye).try_normalize(1e-12).ok_or(GeometryError::InvalidPose)?;
        let x = z.cross(&up).try_normalize(1e-12).ok_or(GeometryError::InvalidPose)?;
        let y = z.cross(&x);
        Self::new(Matrix3::from_columns(&[x, y, z]), eye)
    }

    pub fn rotation(&self) -> &Matrix3<f64> {
        &self.rotation
    }

    pub fn translation(&self) -> &Vec3 {
        &self.translation
    }

    pub fn to_base(&self, p_cam: &Vec3) -> Vec3 {
        self.rotation * p_cam + self.translation
    }

    pub fn to_camera(&self, p_base: &Vec3) -> Vec3 {
        self.rotation.transpose() * (p_base - self.translation)
    }

    /// Composition `self ∘ inner`: first `inner`, then `self`.
    pub fn compose(&self, inner: &CameraPose) -> CameraPose {
        CameraPose {
            rotation: self.rotation * inner.rotation,
            translation: self.rotation * inner.translation + self.translation,
        }
    }
}

/// Back-projects pixel `(u, v)` at camera-frame depth `depth` into the base
/// frame.
pub fn deproject(
    pixel: (f64, f64),
    depth: f64,
    intr: &CameraIntrinsics,
    pose: &CameraPose,
) -> Result<Vec3, GeometryError> {
    let (u, v) = pixel;
    if !intr.contains(u, v) {
        return Err(GeometryError::OutOfBounds { u, v });
    }
    if !(depth > 0.0) || !depth.is_finite() {
        return Err(GeometryError::InvalidDepth { u, v });
    }
    let p_cam = Vec3::new((u - intr.cx) * depth / intr.fx, (v - intr.cy) * depth / intr.fy, depth);
    Ok(pose.to_base(&p_cam))
}

/// Projects a base-frame point to a pixel. Fails for points at or behind the
/// image plane.
pub fn project(point: &Vec3, intr: &CameraIntrinsics, pose: &CameraPose) -> Result<(f64, f64), GeometryError> {
    let p = pose.to_camera(point);
    if p.z <= 0.0 {
        return Err(GeometryError::BehindCamera);
    }
    Ok((intr.fx * p.x / p.z + intr.cx, intr.fy * p.y / p.z + intr.cy))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn principal_point_ray() {
        let intr = CameraIntrinsics::default();
        let p = deproject((intr.cx, intr.cy), 1.0, &intr, &CameraPose::identity()).unwrap();
        assert_eq!(p, Vec3::new(0.0, 0.0, 1.0));
    }

    #[test]
    fn unit_offset_pixel() {
        let intr = CameraIntrinsics::new(100.0, 100.0, 50.0, 40.0, 200, 100).unwrap();
        let p = deproject((intr.cx + intr.fx, intr.cy), 1.0, &intr, &CameraPose::identity()).unwrap();
        assert!((p - Vec3::new(1.0, 0.0, 1.0)).norm() < 1e-12);
    }

    #[test]
    fn errors() {
        let intr = CameraIntrinsics::default();
        let id = CameraPose::identity();
        assert!(matches!(deproject((10.0, 10.0), 0.0, &intr, &id), Err(GeometryError::InvalidDepth { .. })));
        assert!(matches!(deproject((-1.0, 10.0), 1.0, &intr, &id), Err(GeometryError::OutOfBounds { .. })));
        assert!(matches!(deproject((320.0, 10.0), 1.0, &intr, &id), Err(GeometryError::OutOfBounds { .. })));
        assert!(CameraIntrinsics::new(0.0, 1.0, 1.0, 1.0, 4, 4).is_err());
        assert!(CameraIntrinsics::new(1.0, 1.0, 4.0, 1.0, 4, 4).is_err());
    }

    #[test]
    fn pose_validation() {
        let mut m = Matrix3::identity();
        m[(0, 0)] = -1.0; // reflection, det = -1
        assert!(CameraPose::new(m, Vec3::zeros()).is_err());
        m[(0, 0)] = 1.0 + 1e-6;
        assert!(CameraPose::new(m, Vec3::zeros()).is_err());
    }

    #[test]
    fn look_at_top_down() {
        let pose = CameraPose::look_at(
            Vec3::new(0.0, -0.6, 1.0),
            Vec3::new(0.0, -0.6, 0.0),
            Vec3::new(0.0, 1.0, 0.0),
        )
        .unwrap();
        let r = pose.rotation();
        assert!((r.column(0) - Vec3::new(1.0, 0.0, 0.0)).norm() < 1e-12);
        assert!((r.column(1) - Vec3::new(0.0, -1.0, 0.0)).norm() < 1e-12);
        assert!((r.column(2) - Vec3::new(0.0, 0.0, -1.0)).norm() < 1e-12);
    }
}

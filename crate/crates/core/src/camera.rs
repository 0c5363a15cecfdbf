use nalgebra::{Matrix3, Vector3};

use crate::error::{Error, Result};

/// Pinhole camera with a world-to-camera pose. Camera frame follows the
/// OpenCV convention: +z forward, +x right, +y down.
#[derive(Clone, Debug, PartialEq)]
pub struct CameraView {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: Matrix3<f64>,
    pub translation: Vector3<f64>,
}

impl CameraView {
    /// Orthonormality tolerance used when constructing cameras in code.
    pub const ORTHONORMAL_TOL: f64 = 1e-6;

    /// Camera at `eye` looking at `target`; `up` is the world direction that
    /// should appear upwards in the image.
    pub fn look_at(
        id: impl Into<String>,
        width: usize,
        height: usize,
        focal: f64,
        eye: Vector3<f64>,
        target: Vector3<f64>,
        up: Vector3<f64>,
    ) -> Self {
        let z = (target - eye).normalize();
        let y = -(up - z * up.dot(&z)).normalize();
        let x = y.cross(&z);
        let rotation = Matrix3::from_rows(&[x.transpose(), y.transpose(), z.transpose()]);
        CameraView {
            id: id.into(),
            width,
            height,
            fx: focal,
            fy: focal,
            cx: width as f64 / 2.0,
            cy: height as f64 / 2.0,
            rotation,
            translation: -(rotation * eye),
        }
    }

    pub fn validate(&self, tol: f64) -> Result<()> {
        let bad = |reason: String| Error::InvalidCamera {
            id: self.id.clone(),
            reason,
        };
        if self.width == 0 || self.height == 0 {
            return Err(bad("image dimensions must be positive".into()));
        }
        if !(self.fx > 0.0 && self.fy > 0.0) {
            return Err(bad("focal lengths must be positive".into()));
        }
        if !(self.cx > 0.0 && self.cx < self.width as f64 && self.cy > 0.0 && self.cy < self.height as f64) {
            return Err(bad("principal point must lie inside the image".into()));
        }
        let dev = (self.rotation.transpose() * self.rotation - Matrix3::identity())
            .abs()
            .max();
        if dev.is_nan() || dev > tol {
            return Err(bad(format!("rotation is not orthonormal (|R^T R - I| = {dev:.3e})")));
        }
        if !self.translation.iter().all(|v| v.is_finite()) {
            return Err(bad("translation is not finite".into()));
        }
        Ok(())
    }

    pub fn to_camera(&self, world: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * world + self.translation
    }

    /// Camera center in world coordinates.
    pub fn center(&self) -> Vector3<f64> {
        -(self.rotation.transpose() * self.translation)
    }

    pub fn pixel_count(&self) -> usize {
        self.width * self.height
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn look_at_centers_target() {
        let cam = CameraView::look_at(
            "a",
            64,
            48,
            50.0,
            Vector3::new(1.0, 2.0, -3.0),
            Vector3::zeros(),
            Vector3::y(),
        );
        cam.validate(1e-9).unwrap();
        let p = cam.to_camera(&Vector3::zeros());
        assert!(p.x.abs() < 1e-12 && p.y.abs() < 1e-12 && p.z > 0.0);
        assert!((cam.center() - Vector3::new(1.0, 2.0, -3.0)).norm() < 1e-12);
        assert!((cam.rotation.determinant() - 1.0).abs() < 1e-12);
        // world up maps to image up (negative camera y)
        let up = cam.to_camera(&Vector3::new(0.0, 0.1, 0.0));
        assert!(up.y < 0.0);
    }

    #[test]
    fn rejects_skewed_rotation() {
        let mut cam = CameraView::look_at("a", 10, 10, 5.0, -Vector3::z(), Vector3::zeros(), Vector3::y());
        cam.rotation[(0, 1)] += 1e-2;
        assert!(cam.validate(1e-3).is_err());
        cam.rotation[(0, 1)] -= 1e-2;
        cam.cx = 10.0;
        assert!(cam.validate(1e-3).is_err());
    }
}

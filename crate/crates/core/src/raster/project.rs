use nalgebra::{Matrix2, Matrix2x3, Vector2};

use super::RasterConfig;
use crate::camera::CameraView;
use crate::scene::Gaussian;

/// Footprints are truncated at this Mahalanobis radius; tile binning uses the
/// axis-aligned box of the same ellipse, so truncation never depends on tiling.
pub const TRUNCATION_SIGMA: f64 = 3.0;

#[derive(Clone, Debug, PartialEq)]
pub struct Projected2D {
    pub gaussian_index: usize,
    /// Pixel coordinates; pixel `(x, y)` samples the image at `(x, y)`.
    pub mean2d: Vector2<f64>,
    pub cov2d: Matrix2<f64>,
    /// Inverse covariance as `(a, b, c)` for `a dx^2 + 2 b dx dy + c dy^2`.
    pub conic: [f64; 3],
    /// Half extents of the 3-sigma bounding box, in pixels.
    pub extent: [f64; 2],
    pub depth: f64,
    pub opacity: f64,
}

impl Projected2D {
    pub fn new(gaussian_index: usize, mean2d: Vector2<f64>, cov2d: Matrix2<f64>, depth: f64, opacity: f64) -> Self {
        let det = cov2d[(0, 0)] * cov2d[(1, 1)] - cov2d[(0, 1)] * cov2d[(1, 0)];
        assert!(
            det > 0.0 && det.is_finite(),
            "projected covariance of gaussian {gaussian_index} is singular (det = {det})"
        );
        let conic = [cov2d[(1, 1)] / det, -cov2d[(0, 1)] / det, cov2d[(0, 0)] / det];
        let extent = [
            TRUNCATION_SIGMA * cov2d[(0, 0)].sqrt(),
            TRUNCATION_SIGMA * cov2d[(1, 1)].sqrt(),
        ];
        Projected2D {
            gaussian_index,
            mean2d,
            cov2d,
            conic,
            extent,
            depth,
            opacity,
        }
    }

    /// Squared Mahalanobis distance of `pixel` from the center.
    pub fn mahalanobis2(&self, pixel: [f64; 2]) -> f64 {
        let dx = pixel[0] - self.mean2d.x;
        let dy = pixel[1] - self.mean2d.y;
        let [a, b, c] = self.conic;
        a * dx * dx + 2.0 * b * dx * dy + c * dy * dy
    }
}

/// EWA projection of one Gaussian. Returns `None` when the center lies in
/// front of the near plane or outside the padded frustum.
pub fn project_gaussian(index: usize, g: &Gaussian, cam: &CameraView, cfg: &RasterConfig) -> Option<Projected2D> {
    let p = cam.to_camera(&g.position);
    if p.z.is_nan() || p.z <= cfg.near {
        return None;
    }
    let u = cam.fx * p.x / p.z + cam.cx;
    let v = cam.fy * p.y / p.z + cam.cy;
    let (w, h) = (cam.width as f64, cam.height as f64);
    let pad = cfg.frustum_pad;
    if u < -pad * w || u > (1.0 + pad) * w || v < -pad * h || v > (1.0 + pad) * h {
        return None;
    }

    let cov_cam = cam.rotation * g.covariance() * cam.rotation.transpose();
    let z2 = p.z * p.z;
    let j = Matrix2x3::new(
        cam.fx / p.z,
        0.0,
        -cam.fx * p.x / z2,
        0.0,
        cam.fy / p.z,
        -cam.fy * p.y / z2,
    );
    let mut cov2d = j * cov_cam * j.transpose();
    cov2d[(0, 1)] = 0.5 * (cov2d[(0, 1)] + cov2d[(1, 0)]);
    cov2d[(1, 0)] = cov2d[(0, 1)];
    cov2d[(0, 0)] += cfg.low_pass;
    cov2d[(1, 1)] += cfg.low_pass;

    Some(Projected2D::new(index, Vector2::new(u, v), cov2d, p.z, g.opacity))
}

/// Alpha of a projected Gaussian at `pixel`: `o * exp(-m^2 / 2)` clamped to
/// `alpha_max`, zero beyond the truncation radius or below `alpha_min`.
pub fn compute_alpha(p: &Projected2D, pixel: [f64; 2], cfg: &RasterConfig) -> f64 {
    let m2 = p.mahalanobis2(pixel);
    if m2 > TRUNCATION_SIGMA * TRUNCATION_SIGMA {
        return 0.0;
    }
    let alpha = (p.opacity * (-0.5 * m2).exp()).min(cfg.alpha_max);
    if alpha < cfg.alpha_min {
        0.0
    } else {
        alpha
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix3, Vector3};

    fn axis_camera() -> CameraView {
        CameraView {
            id: "c".into(),
            width: 100,
            height: 100,
            fx: 100.0,
            fy: 100.0,
            cx: 50.0,
            cy: 50.0,
            rotation: Matrix3::identity(),
            translation: Vector3::zeros(),
        }
    }

    fn gaussian_at(x: f64, y: f64, z: f64) -> Gaussian {
        Gaussian::isotropic(Vector3::new(x, y, z), 0.05, 0.8, [1.0, 0.0, 0.0]).unwrap()
    }

    #[test]
    fn on_axis_projects_to_principal_point() {
        let p = project_gaussian(0, &gaussian_at(0.0, 0.0, 2.0), &axis_camera(), &RasterConfig::default()).unwrap();
        assert_eq!(p.mean2d, Vector2::new(50.0, 50.0));
        assert_eq!(p.depth, 2.0);
    }

    #[test]
    fn lateral_offset_follows_pinhole() {
        let p = project_gaussian(0, &gaussian_at(0.5, 0.0, 2.0), &axis_camera(), &RasterConfig::default()).unwrap();
        assert!((p.mean2d - Vector2::new(75.0, 50.0)).norm() < 1e-12);
    }

    #[test]
    fn behind_camera_and_far_outside_are_culled() {
        let cfg = RasterConfig::default();
        assert!(project_gaussian(0, &gaussian_at(0.0, 0.0, -1.0), &axis_camera(), &cfg).is_none());
        assert!(project_gaussian(0, &gaussian_at(10.0, 0.0, 1.0), &axis_camera(), &cfg).is_none());
    }

    #[test]
    fn covariance_matches_jacobian_propagation() {
        // isotropic sigma at depth z maps to (f sigma / z)^2 on the axis
        let p = project_gaussian(0, &gaussian_at(0.0, 0.0, 2.0), &axis_camera(), &RasterConfig::default()).unwrap();
        let expect = (100.0 * 0.05 / 2.0f64).powi(2) + 0.3;
        assert!((p.cov2d[(0, 0)] - expect).abs() < 1e-12);
        assert!((p.cov2d[(1, 1)] - expect).abs() < 1e-12);
        assert!(p.cov2d[(0, 1)].abs() < 1e-12);
    }

    #[test]
    fn alpha_examples() {
        let cfg = RasterConfig::default();
        let p = Projected2D::new(0, Vector2::new(3.0, 4.0), Matrix2::identity(), 1.0, 1.0);
        assert_eq!(compute_alpha(&p, [3.0, 4.0], &cfg), 0.99);
        assert!((compute_alpha(&p, [4.0, 4.0], &cfg) - (-0.5f64).exp()).abs() < 1e-15);
        assert_eq!(compute_alpha(&p, [13.0, 4.0], &cfg), 0.0);
        let q = Projected2D::new(0, Vector2::new(3.0, 4.0), Matrix2::identity(), 1.0, 0.42);
        assert_eq!(compute_alpha(&q, [3.0, 4.0], &cfg), 0.42);
        // 2.9 sigma keeps o*exp(-4.2) = 0.015 > 1/255; 3.1 sigma is truncated
        assert!(compute_alpha(&p, [5.9, 4.0], &cfg) > 0.0);
        assert_eq!(compute_alpha(&p, [6.1, 4.0], &cfg), 0.0);
    }

    #[test]
    fn faint_contributions_are_skipped() {
        let cfg = RasterConfig::default();
        let p = Projected2D::new(0, Vector2::new(0.0, 0.0), Matrix2::identity(), 1.0, 0.003);
        assert_eq!(compute_alpha(&p, [0.0, 0.0], &cfg), 0.0);
    }

    #[test]
    #[should_panic(expected = "singular")]
    fn singular_covariance_is_asserted() {
        Projected2D::new(0, Vector2::zeros(), Matrix2::zeros(), 1.0, 0.5);
    }
}

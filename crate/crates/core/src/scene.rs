//! Gaussian primitives and scenes.

use nalgebra::{Matrix3, Quaternion, UnitQuaternion, Vector3};

use crate::error::{Error, Result};
use crate::sh;

/// Builds `R diag(s^2) R^T` from per-axis standard deviations and a (not
/// necessarily normalized) quaternion.
pub fn build_covariance(scale: &Vector3<f64>, rotation: &Quaternion<f64>) -> Result<Matrix3<f64>> {
    let norm = rotation.norm();
    if norm == 0.0 || !norm.is_finite() {
        return Err(Error::InvalidRotation);
    }
    let r = UnitQuaternion::from_quaternion(*rotation).to_rotation_matrix();
    let m = r.matrix() * Matrix3::from_diagonal(&scale.component_mul(scale)) * r.matrix().transpose();
    Ok((m + m.transpose()) * 0.5)
}

/// Sigmoid, saturating strictly inside (0, 1).
pub fn opacity_from_logit(logit: f64) -> f64 {
    let o = 1.0 / (1.0 + (-logit).exp());
    o.clamp(f64::MIN_POSITIVE, 1.0 - f64::EPSILON / 2.0)
}

pub fn logit_from_opacity(opacity: f64) -> f64 {
    (opacity / (1.0 - opacity)).ln()
}

#[derive(Clone, Debug, PartialEq)]
pub struct Gaussian {
    pub position: Vector3<f64>,
    /// Per-axis standard deviations (world units).
    pub scale: Vector3<f64>,
    pub rotation: UnitQuaternion<f64>,
    pub opacity: f64,
    /// SH coefficients, `(degree + 1)^2` RGB triples, DC first.
    pub sh: Vec<[f32; 3]>,
}

impl Gaussian {
    pub fn new(
        position: Vector3<f64>,
        scale: Vector3<f64>,
        rotation: Quaternion<f64>,
        opacity: f64,
        sh: Vec<[f32; 3]>,
    ) -> Result<Self> {
        let norm = rotation.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(Error::InvalidRotation);
        }
        let g = Gaussian {
            position,
            scale,
            rotation: UnitQuaternion::from_quaternion(rotation),
            opacity,
            sh,
        };
        g.check(0)?;
        Ok(g)
    }

    /// Isotropic Gaussian with a flat RGB color.
    pub fn isotropic(position: Vector3<f64>, sigma: f64, opacity: f64, rgb: [f64; 3]) -> Result<Self> {
        Self::new(
            position,
            Vector3::repeat(sigma),
            Quaternion::identity(),
            opacity,
            vec![sh::dc_from_rgb(rgb)],
        )
    }

    pub fn covariance(&self) -> Matrix3<f64> {
        let r = self.rotation.to_rotation_matrix();
        let m = r.matrix() * Matrix3::from_diagonal(&self.scale.component_mul(&self.scale)) * r.matrix().transpose();
        (m + m.transpose()) * 0.5
    }

    pub fn sh_degree(&self) -> Option<u8> {
        sh::degree_for_count(self.sh.len())
    }

    fn check(&self, index: usize) -> Result<()> {
        let bad = |reason: &str| Error::InvalidGaussian {
            index,
            reason: reason.to_string(),
        };
        if !self.position.iter().all(|v| v.is_finite()) {
            return Err(bad("non-finite position"));
        }
        if !self.scale.iter().all(|&s| s > 0.0 && s.is_finite()) {
            return Err(bad("scale must be positive and finite"));
        }
        if !(self.opacity > 0.0 && self.opacity < 1.0) {
            return Err(bad("opacity must lie in (0, 1)"));
        }
        if (self.rotation.norm() - 1.0).abs() > 1e-6 {
            return Err(bad("rotation is not unit norm"));
        }
        if self.sh_degree().is_none() {
            return Err(bad("SH coefficient count is not (degree+1)^2 for degree 0..=3"));
        }
        Ok(())
    }
}

/// A set of Gaussians with optional per-Gaussian semantic features stored
/// row-major (`len() * feature_dim` floats). `feature_dim == 0` means no features.
#[derive(Clone, Debug, PartialEq)]
pub struct GaussianScene {
    pub gaussians: Vec<Gaussian>,
    feature_dim: usize,
    features: Vec<f32>,
}

impl GaussianScene {
    pub fn new(gaussians: Vec<Gaussian>) -> Result<Self> {
        let scene = GaussianScene {
            gaussians,
            feature_dim: 0,
            features: Vec::new(),
        };
        scene.validate()?;
        Ok(scene)
    }

    pub fn with_features(gaussians: Vec<Gaussian>, feature_dim: usize, features: Vec<f32>) -> Result<Self> {
        let mut scene = Self::new(gaussians)?;
        scene.set_features(feature_dim, features)?;
        Ok(scene)
    }

    pub fn validate(&self) -> Result<()> {
        let mut sh_len = None;
        for (i, g) in self.gaussians.iter().enumerate() {
            g.check(i)?;
            match sh_len {
                None => sh_len = Some(g.sh.len()),
                Some(n) if n != g.sh.len() => {
                    return Err(Error::InvalidGaussian {
                        index: i,
                        reason: "SH degree differs from the rest of the scene".into(),
                    })
                }
                _ => {}
            }
        }
        if self.features.len() != self.gaussians.len() * self.feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.gaussians.len() * self.feature_dim,
                actual: self.features.len(),
            });
        }
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.gaussians.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gaussians.is_empty()
    }

    pub fn feature_dim(&self) -> usize {
        self.feature_dim
    }

    pub fn has_features(&self) -> bool {
        self.feature_dim > 0
    }

    pub fn sh_degree(&self) -> u8 {
        self.gaussians.first().and_then(Gaussian::sh_degree).unwrap_or(0)
    }

    pub fn features(&self) -> &[f32] {
        &self.features
    }

    pub fn feature(&self, index: usize) -> Option<&[f32]> {
        (self.feature_dim > 0).then(|| &self.features[index * self.feature_dim..(index + 1) * self.feature_dim])
    }

    pub fn set_features(&mut self, feature_dim: usize, features: Vec<f32>) -> Result<()> {
        if features.len() != self.gaussians.len() * feature_dim {
            return Err(Error::DimensionMismatch {
                expected: self.gaussians.len() * feature_dim,
                actual: features.len(),
            });
        }
        self.feature_dim = feature_dim;
        self.features = features;
        Ok(())
    }

    pub fn clear_features(&mut self) {
        self.feature_dim = 0;
        self.features.clear();
    }

    /// New scene containing `indices` in the given order, features included.
    pub fn subset(&self, indices: &[usize]) -> GaussianScene {
        let d = self.feature_dim;
        let mut features = Vec::with_capacity(indices.len() * d);
        for &i in indices {
            features.extend_from_slice(&self.features[i * d..(i + 1) * d]);
        }
        GaussianScene {
            gaussians: indices.iter().map(|&i| self.gaussians[i].clone()).collect(),
            feature_dim: d,
            features,
        }
    }
}

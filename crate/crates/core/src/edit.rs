//! Object-level editing: select Gaussians spatially or semantically and copy
//! them, rigidly transformed, into another scene.

use nalgebra::{UnitQuaternion, Vector3};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::query::{relevancy, QuerySpec};
use crate::scene::GaussianScene;
use crate::sh;

#[derive(Clone, Debug, PartialEq)]
pub enum Selection {
    /// Positions inside the closed box `[min, max]`.
    Aabb { min: Vector3<f64>, max: Vector3<f64> },
    /// Gaussians whose feature relevancy to the query exceeds the threshold.
    /// Relevancy is the scaled cosine `(cos + 1) / 2` used for pixel queries.
    Relevancy { query: Vec<f32>, threshold: f64 },
}

pub fn select_gaussians(scene: &GaussianScene, selection: &Selection) -> Result<Vec<usize>> {
    match selection {
        Selection::Aabb { min, max } => Ok((0..scene.len())
            .filter(|&i| {
                let p = &scene.gaussians[i].position;
                (0..3).all(|k| p[k] >= min[k] && p[k] <= max[k])
            })
            .collect()),
        Selection::Relevancy { query, threshold } => {
            if !scene.has_features() {
                return Err(Error::MissingFeatures);
            }
            let spec = QuerySpec::new(query.clone(), Vec::new())?;
            if spec.dim() != scene.feature_dim() {
                return Err(Error::DimensionMismatch {
                    expected: scene.feature_dim(),
                    actual: spec.dim(),
                });
            }
            Ok((0..scene.len())
                .filter(|&i| relevancy(scene.feature(i).expect("features present"), &spec) > *threshold)
                .collect())
        }
    }
}

/// Similarity transform `p -> scale * R p + t`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Transform {
    pub rotation: UnitQuaternion<f64>,
    pub translation: Vector3<f64>,
    pub scale: f64,
}

impl Default for Transform {
    fn default() -> Self {
        Transform {
            rotation: UnitQuaternion::identity(),
            translation: Vector3::zeros(),
            scale: 1.0,
        }
    }
}

impl Transform {
    pub fn validate(&self) -> Result<()> {
        if !(self.scale > 0.0 && self.scale.is_finite()) || !self.translation.iter().all(|v| v.is_finite()) {
            return Err(Error::InvalidConfig(format!("invalid transform {self:?}")));
        }
        Ok(())
    }

    pub fn apply(&self, p: &Vector3<f64>) -> Vector3<f64> {
        self.rotation * p * self.scale + self.translation
    }

    /// Camera that sees the untransformed scene exactly as `cam` sees the
    /// transformed one.
    pub fn camera_for_original(&self, cam: &CameraView) -> CameraView {
        let r = self.rotation.to_rotation_matrix();
        CameraView {
            rotation: cam.rotation * r.matrix(),
            translation: (cam.rotation * self.translation + cam.translation) / self.scale,
            ..cam.clone()
        }
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct InsertOptions {
    /// When only one scene has features, give the other side zero features
    /// instead of failing.
    pub zero_fill_features: bool,
}

/// Appends transformed copies of `src[indices]` to a copy of `dst`.
pub fn insert(
    src: &GaussianScene,
    indices: &[usize],
    transform: &Transform,
    dst: &GaussianScene,
    opts: InsertOptions,
) -> Result<GaussianScene> {
    transform.validate()?;
    if let Some(&bad) = indices.iter().find(|&&i| i >= src.len()) {
        return Err(Error::InvalidConfig(format!(
            "index {bad} out of range for {} source gaussians",
            src.len()
        )));
    }
    if indices.is_empty() {
        return Ok(dst.clone());
    }
    let (ds, dd) = (src.feature_dim(), dst.feature_dim());
    let dim = if ds == dd || dst.is_empty() {
        ds
    } else if (ds == 0 || dd == 0) && opts.zero_fill_features {
        ds.max(dd)
    } else {
        return Err(Error::DimensionMismatch {
            expected: dd,
            actual: ds,
        });
    };

    let target_coeffs = if dst.is_empty() {
        sh::coeff_count(src.sh_degree())
    } else {
        sh::coeff_count(dst.sh_degree())
    };
    if sh::coeff_count(src.sh_degree()) > target_coeffs {
        return Err(Error::InvalidConfig(format!(
            "source SH degree {} exceeds destination degree {}",
            src.sh_degree(),
            dst.sh_degree()
        )));
    }

    let rot = transform.rotation.to_rotation_matrix();
    let mut gaussians = dst.gaussians.clone();
    let mut features = if dd == dim {
        dst.features().to_vec()
    } else {
        vec![0f32; dst.len() * dim]
    };
    for &i in indices {
        let mut g = src.gaussians[i].clone();
        g.position = transform.apply(&g.position);
        g.rotation = transform.rotation * g.rotation;
        g.scale *= transform.scale;
        if g.sh.len() > 1 {
            g.sh = sh::rotate_coefficients(&g.sh, &rot);
        }
        g.sh.resize(target_coeffs, [0.0; 3]);
        gaussians.push(g);
        match src.feature(i) {
            Some(f) if ds == dim => features.extend_from_slice(f),
            _ => features.extend(std::iter::repeat_n(0f32, dim)),
        }
    }
    GaussianScene::with_features(gaussians, dim, features)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::{render_color, RasterConfig};
    use crate::scene::Gaussian;
    use nalgebra::Quaternion;

    fn line_scene(n: usize, d: usize) -> GaussianScene {
        let gs = (0..n)
            .map(|i| Gaussian::isotropic(Vector3::new(i as f64, 0.0, 0.0), 0.1, 0.5, [0.2, 0.4, 0.6]).unwrap())
            .collect();
        let feats = (0..n * d)
            .map(|k| if k % d == (k / d) % d { 1.0 } else { 0.0 })
            .collect();
        GaussianScene::with_features(gs, d, feats).unwrap()
    }

    #[test]
    fn aabb_selection() {
        let s = line_scene(5, 2);
        let all = Selection::Aabb {
            min: Vector3::repeat(-10.0),
            max: Vector3::repeat(10.0),
        };
        assert_eq!(select_gaussians(&s, &all).unwrap(), vec![0, 1, 2, 3, 4]);
        let none = Selection::Aabb {
            min: Vector3::repeat(20.0),
            max: Vector3::repeat(30.0),
        };
        assert!(select_gaussians(&s, &none).unwrap().is_empty());
        let some = Selection::Aabb {
            min: Vector3::new(0.5, -1.0, -1.0),
            max: Vector3::new(2.0, 1.0, 1.0),
        };
        assert_eq!(select_gaussians(&s, &some).unwrap(), vec![1, 2]);
    }

    #[test]
    fn one_hot_relevancy_selection() {
        let s = line_scene(9, 3);
        let sel = Selection::Relevancy {
            query: vec![0.0, 1.0, 0.0],
            threshold: 0.9,
        };
        assert_eq!(select_gaussians(&s, &sel).unwrap(), vec![1, 4, 7]);
        let mut bare = s.clone();
        bare.clear_features();
        assert!(matches!(select_gaussians(&bare, &sel), Err(Error::MissingFeatures)));
    }

    #[test]
    fn insert_appends_and_preserves_source() {
        let src = line_scene(4, 3);
        let dst = line_scene(2, 3);
        let before = src.clone();
        let t = Transform {
            translation: Vector3::new(0.0, 5.0, 0.0),
            ..Default::default()
        };
        let merged = insert(&src, &[1, 3], &t, &dst, InsertOptions::default()).unwrap();
        assert_eq!(src, before);
        assert_eq!(merged.len(), 4);
        assert_eq!(&merged.gaussians[..2], &dst.gaussians[..]);
        assert_eq!(merged.gaussians[2].position, Vector3::new(1.0, 5.0, 0.0));
        assert_eq!(merged.feature(3).unwrap(), src.feature(3).unwrap());
        assert_eq!(insert(&src, &[], &t, &dst, InsertOptions::default()).unwrap(), dst);
        assert!(insert(&src, &[9], &t, &dst, InsertOptions::default()).is_err());
    }

    #[test]
    fn feature_dim_mismatch() {
        let src = line_scene(2, 3);
        let dst = line_scene(2, 4);
        assert!(matches!(
            insert(&src, &[0], &Transform::default(), &dst, InsertOptions::default()),
            Err(Error::DimensionMismatch { .. })
        ));
        let mut bare = dst.clone();
        bare.clear_features();
        assert!(insert(&src, &[0], &Transform::default(), &bare, InsertOptions::default()).is_err());
        let filled = insert(
            &src,
            &[0],
            &Transform::default(),
            &bare,
            InsertOptions {
                zero_fill_features: true,
            },
        )
        .unwrap();
        assert_eq!(filled.feature_dim(), 3);
        assert_eq!(filled.feature(0).unwrap(), &[0.0; 3]);
        assert_eq!(filled.feature(2).unwrap(), src.feature(0).unwrap());
        let opts = InsertOptions {
            zero_fill_features: true,
        };
        assert!(insert(&src, &[0], &Transform::default(), &dst, opts).is_err());
    }

    #[test]
    fn empty_destination_adopts_source_features() {
        let src = line_scene(3, 4);
        let empty = GaussianScene::new(Vec::new()).unwrap();
        let out = insert(&src, &[1, 2], &Transform::default(), &empty, InsertOptions::default()).unwrap();
        assert_eq!(out.len(), 2);
        assert_eq!(out.feature_dim(), 4);
        assert_eq!(out.feature(0).unwrap(), src.feature(1).unwrap());
    }

    #[test]
    fn rotation_composes_with_gaussian_orientation() {
        let g = Gaussian::new(
            Vector3::new(1.0, 0.0, 0.0),
            Vector3::new(0.3, 0.1, 0.05),
            Quaternion::new(0.9, 0.1, 0.3, 0.0),
            0.7,
            vec![[0.1, 0.2, 0.3]],
        )
        .unwrap();
        let src = GaussianScene::new(vec![g.clone()]).unwrap();
        let t = Transform {
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
            translation: Vector3::new(0.0, 0.0, 1.0),
            scale: 2.0,
        };
        let out = insert(
            &src,
            &[0],
            &t,
            &GaussianScene::new(vec![]).unwrap(),
            InsertOptions::default(),
        )
        .unwrap();
        let h = &out.gaussians[0];
        assert!((h.position - Vector3::new(0.0, 2.0, 1.0)).norm() < 1e-12);
        let r = t.rotation.to_rotation_matrix();
        let expect = r.matrix() * g.covariance() * r.matrix().transpose() * 4.0;
        assert!((h.covariance() - expect).amax() < 1e-12);
    }

    fn sh_scene() -> GaussianScene {
        let gs = (0..6)
            .map(|i| {
                let t = i as f64;
                let sh = (0..16)
                    .map(|j| [0.3 - 0.02 * j as f32, 0.1 * (j % 3) as f32, -0.05 * (j % 5) as f32])
                    .collect();
                Gaussian::new(
                    Vector3::new(0.3 * t - 0.75, 0.2 * (t % 3.0) - 0.2, 0.1 * t),
                    Vector3::new(0.08, 0.05 + 0.01 * t, 0.03),
                    Quaternion::new(1.0, 0.2 * t, -0.1, 0.3),
                    0.4 + 0.08 * t,
                    sh,
                )
                .unwrap()
            })
            .collect();
        GaussianScene::new(gs).unwrap()
    }

    #[test]
    fn render_equivariance() {
        let src = sh_scene();
        let all: Vec<usize> = (0..src.len()).collect();
        let cfg = RasterConfig::default();
        let cam = CameraView::look_at(
            "c",
            96,
            80,
            90.0,
            Vector3::new(0.5, -0.4, -3.0),
            Vector3::new(0.0, 1.0, 0.2),
            Vector3::new(0.0, -1.0, 0.0),
        );
        for t in [
            Transform {
                rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), std::f64::consts::FRAC_PI_2),
                translation: Vector3::new(0.0, 1.0, 0.0),
                scale: 1.0,
            },
            Transform {
                rotation: UnitQuaternion::from_euler_angles(0.3, -0.2, 0.5),
                translation: Vector3::new(0.1, 0.8, 0.3),
                scale: 1.5,
            },
        ] {
            let moved = insert(
                &src,
                &all,
                &t,
                &GaussianScene::new(vec![]).unwrap(),
                InsertOptions::default(),
            )
            .unwrap();
            let a = render_color(&moved, &cam, &cfg).unwrap();
            let b = render_color(&src, &t.camera_for_original(&cam), &cfg).unwrap();
            let mut max = 0f32;
            for y in 4..cam.height - 4 {
                for x in 4..cam.width - 4 {
                    let (p, q) = (a.rgb[y * cam.width + x], b.rgb[y * cam.width + x]);
                    for c in 0..3 {
                        max = max.max((p[c] - q[c]).abs());
                    }
                }
            }
            assert!(a.alpha.iter().any(|&v| v > 0.5));
            assert!(max < 1e-4, "max diff {max}");
        }
    }
}

use rayon::prelude::*;

use super::{bin_and_sort, compute_alpha, project_gaussian, Projected2D, RasterConfig, TileBins};
use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::scene::GaussianScene;
use crate::sh;

/// One scene prepared for rendering from one camera.
pub struct Frame<'a> {
    pub camera: &'a CameraView,
    pub config: RasterConfig,
    pub projected: Vec<Projected2D>,
    pub bins: TileBins,
}

/// Color render plus accumulated alpha (`1 - final transmittance`).
#[derive(Clone, Debug, PartialEq)]
pub struct ColorImage {
    pub width: usize,
    pub height: usize,
    pub rgb: Vec<[f32; 3]>,
    pub alpha: Vec<f32>,
}

/// Weight of one Gaussian at its own center pixel in one view.
#[derive(Clone, Debug, PartialEq)]
pub struct CenterSample<'m> {
    pub gaussian_index: usize,
    pub view: usize,
    pub pixel: [u32; 2],
    pub weight: f64,
    pub feature: &'m [f32],
}

impl<'a> Frame<'a> {
    pub fn new(scene: &GaussianScene, camera: &'a CameraView, config: &RasterConfig) -> Result<Self> {
        if scene.is_empty() {
            return Err(Error::EmptyScene);
        }
        let projected: Vec<Projected2D> = scene
            .gaussians
            .par_iter()
            .enumerate()
            .filter_map(|(i, g)| project_gaussian(i, g, camera, config))
            .collect();
        let bins = bin_and_sort(&projected, camera.width, camera.height);
        Ok(Frame {
            camera,
            config: *config,
            projected,
            bins,
        })
    }

    /// Front-to-back blend at pixel `(x, y)`. Calls `visit(k, w)` for each
    /// contributing footprint `self.projected[k]` with its blending weight
    /// `w = alpha * T`, and returns the final transmittance.
    #[inline]
    pub fn blend_pixel(&self, x: usize, y: usize, mut visit: impl FnMut(usize, f64)) -> f64 {
        let pixel = [x as f64, y as f64];
        let mut t = 1.0;
        for &k in self.bins.tile_for_pixel(x, y) {
            let p = &self.projected[k as usize];
            let alpha = compute_alpha(p, pixel, &self.config);
            if alpha == 0.0 {
                continue;
            }
            visit(k as usize, alpha * t);
            t *= 1.0 - alpha;
            if t < self.config.transmittance_min {
                break;
            }
        }
        t
    }

    pub fn render_color(&self, scene: &GaussianScene) -> ColorImage {
        let center = self.camera.center();
        let colors: Vec<[f64; 3]> = self
            .projected
            .iter()
            .map(|p| {
                let g = &scene.gaussians[p.gaussian_index];
                let dir = (g.position - center).normalize();
                sh::eval_color(&g.sh, &dir)
            })
            .collect();
        let (w, h) = (self.camera.width, self.camera.height);
        let mut rgb = vec![[0f32; 3]; w * h];
        let mut alpha = vec![0f32; w * h];
        rgb.par_chunks_mut(w)
            .zip(alpha.par_chunks_mut(w))
            .enumerate()
            .for_each(|(y, (row, arow))| {
                for x in 0..w {
                    let mut acc = [0f64; 3];
                    let t = self.blend_pixel(x, y, |k, wt| {
                        for c in 0..3 {
                            acc[c] += wt * colors[k][c];
                        }
                    });
                    row[x] = acc.map(|v| v as f32);
                    arow[x] = (1.0 - t) as f32;
                }
            });
        ColorImage {
            width: w,
            height: h,
            rgb,
            alpha,
        }
    }

    pub fn render_features(&self, scene: &GaussianScene) -> Result<FeatureMap> {
        let d = scene.feature_dim();
        if d == 0 {
            return Err(Error::MissingFeatures);
        }
        let (w, h) = (self.camera.width, self.camera.height);
        let min_weight = self.config.feature_min_weight;
        let mut out = FeatureMap::zeros(w, h, d);
        out.data_mut().par_chunks_mut(w * d).enumerate().for_each(|(y, row)| {
            let mut acc = vec![0f64; d];
            for x in 0..w {
                acc.iter_mut().for_each(|v| *v = 0.0);
                self.blend_pixel(x, y, |k, wt| {
                    if wt < min_weight {
                        return;
                    }
                    let f = scene.feature(self.projected[k].gaussian_index).expect("d > 0");
                    for (a, &v) in acc.iter_mut().zip(f) {
                        *a += wt * v as f64;
                    }
                });
                for (o, a) in row[x * d..(x + 1) * d].iter_mut().zip(&acc) {
                    *o = *a as f32;
                }
            }
        });
        Ok(out)
    }

    /// Center-pixel samples for every in-frustum Gaussian whose projected center
    /// `floor(mean2d)` lies inside the image. A sample is emitted only when the
    /// Gaussian's blending weight at that pixel is positive and at least
    /// `occlusion_threshold`. Output is sorted by Gaussian index.
    pub fn center_samples<'m>(
        &self,
        feature_map: &'m FeatureMap,
        view: usize,
        occlusion_threshold: f64,
    ) -> Result<Vec<CenterSample<'m>>> {
        let (w, h) = (self.camera.width, self.camera.height);
        feature_map.check_aspect(w, h)?;

        let mut centers: Vec<(usize, usize)> = self
            .projected
            .iter()
            .enumerate()
            .filter_map(|(k, p)| {
                let (x, y) = (p.mean2d.x.floor(), p.mean2d.y.floor());
                (x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64).then(|| (y as usize * w + x as usize, k))
            })
            .collect();
        centers.sort_unstable();
        let groups: Vec<&[(usize, usize)]> = centers.chunk_by(|a, b| a.0 == b.0).collect();

        let mut samples: Vec<CenterSample<'m>> = groups
            .par_iter()
            .flat_map_iter(|group| {
                let (x, y) = (group[0].0 % w, group[0].0 / w);
                let mut found = Vec::with_capacity(group.len());
                self.blend_pixel(x, y, |k, wt| {
                    if group.iter().any(|&(_, gk)| gk == k) && wt > 0.0 && wt >= occlusion_threshold {
                        found.push(CenterSample {
                            gaussian_index: self.projected[k].gaussian_index,
                            view,
                            pixel: [x as u32, y as u32],
                            weight: wt,
                            feature: feature_map.sample(x, y, w, h),
                        });
                    }
                });
                found
            })
            .collect();
        samples.sort_unstable_by_key(|s| s.gaussian_index);
        Ok(samples)
    }
}

pub fn render_color(scene: &GaussianScene, cam: &CameraView, cfg: &RasterConfig) -> Result<ColorImage> {
    Ok(Frame::new(scene, cam, cfg)?.render_color(scene))
}

pub fn render_features(scene: &GaussianScene, cam: &CameraView, cfg: &RasterConfig) -> Result<FeatureMap> {
    if !scene.has_features() {
        return Err(Error::MissingFeatures);
    }
    Frame::new(scene, cam, cfg)?.render_features(scene)
}

pub fn collect_center_samples<'m>(
    scene: &GaussianScene,
    cam: &CameraView,
    feature_map: &'m FeatureMap,
    occlusion_threshold: f64,
    cfg: &RasterConfig,
) -> Result<Vec<CenterSample<'m>>> {
    Frame::new(scene, cam, cfg)?.center_samples(feature_map, 0, occlusion_threshold)
}

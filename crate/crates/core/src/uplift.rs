//! Training-free feature uplifting.
//!
//! Every view is rendered once. Each Gaussian whose projected center lands
//! inside the image contributes `(w, f)`: its blending weight at that pixel and
//! the 2D feature sampled there. Per-Gaussian features are the weighted mean
//! `sum(w f) / sum(w)` over views; Gaussians that never contribute are
//! flagged inactive and optionally dropped.

use rayon::prelude::*;

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::raster::{CenterSample, Frame, RasterConfig};
use crate::registry::Registry;
use crate::scene::GaussianScene;

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct UpliftConfig {
    /// Center samples with a blending weight below this are discarded.
    pub occlusion_threshold: f64,
    /// `false` averages samples with unit weight (ablation).
    pub weighted: bool,
    /// Drop Gaussians that received no samples.
    pub filter: bool,
    /// Process views strictly one after another on the calling thread.
    pub deterministic: bool,
    pub raster: RasterConfig,
}

impl Default for UpliftConfig {
    fn default() -> Self {
        UpliftConfig {
            occlusion_threshold: 1e-4,
            weighted: true,
            filter: true,
            deterministic: false,
            raster: RasterConfig::default(),
        }
    }
}

impl UpliftConfig {
    pub fn validate(&self) -> Result<()> {
        if self.occlusion_threshold.is_nan() || self.occlusion_threshold < 0.0 {
            return Err(Error::InvalidConfig("occlusion threshold must be >= 0".into()));
        }
        Ok(())
    }
}

/// Running per-Gaussian sums `sum(w f)` and `sum(w)`.
#[derive(Clone, Debug, PartialEq)]
pub struct UpliftAccumulator {
    dim: usize,
    feature_sum: Vec<f64>,
    weight_sum: Vec<f64>,
    view_count: Vec<u32>,
}

impl UpliftAccumulator {
    pub fn new(n_gaussians: usize, dim: usize) -> Self {
        UpliftAccumulator {
            dim,
            feature_sum: vec![0.0; n_gaussians * dim],
            weight_sum: vec![0.0; n_gaussians],
            view_count: vec![0; n_gaussians],
        }
    }

    pub fn len(&self) -> usize {
        self.weight_sum.len()
    }

    pub fn is_empty(&self) -> bool {
        self.weight_sum.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn weight_sum(&self) -> &[f64] {
        &self.weight_sum
    }

    pub fn feature_sum(&self, index: usize) -> &[f64] {
        &self.feature_sum[index * self.dim..(index + 1) * self.dim]
    }

    /// Number of views that contributed a sample to each Gaussian (`|S_i|`).
    pub fn view_count(&self) -> &[u32] {
        &self.view_count
    }

    pub fn accumulate(&mut self, samples: &[CenterSample<'_>], weighted: bool) -> Result<()> {
        for s in samples {
            if s.feature.len() != self.dim {
                return Err(Error::DimensionMismatch {
                    expected: self.dim,
                    actual: s.feature.len(),
                });
            }
            if s.gaussian_index >= self.len() {
                return Err(Error::InvalidConfig(format!(
                    "sample references gaussian {} of {}",
                    s.gaussian_index,
                    self.len()
                )));
            }
        }
        let d = self.dim;
        for s in samples {
            let w = if weighted { s.weight } else { 1.0 };
            let i = s.gaussian_index;
            for (acc, &f) in self.feature_sum[i * d..(i + 1) * d].iter_mut().zip(s.feature) {
                *acc += w * f as f64;
            }
            self.weight_sum[i] += w;
            self.view_count[i] += 1;
        }
        Ok(())
    }

    /// Elementwise sum with another accumulator over the same scene.
    pub fn merge(&mut self, other: &UpliftAccumulator) -> Result<()> {
        if other.dim != self.dim || other.len() != self.len() {
            return Err(Error::DimensionMismatch {
                expected: self.len() * self.dim,
                actual: other.len() * other.dim,
            });
        }
        for (a, b) in self.feature_sum.iter_mut().zip(&other.feature_sum) {
            *a += b;
        }
        for (a, b) in self.weight_sum.iter_mut().zip(&other.weight_sum) {
            *a += b;
        }
        for (a, b) in self.view_count.iter_mut().zip(&other.view_count) {
            *a += b;
        }
        Ok(())
    }

    pub fn is_active(&self, index: usize) -> bool {
        self.weight_sum[index] > 0.0
    }

    /// `sum(w f) / sum(w)` per Gaussian; inactive Gaussians get the zero vector.
    pub fn finalize(&self) -> Finalized {
        let d = self.dim;
        let mut features = vec![0f32; self.feature_sum.len()];
        features
            .par_chunks_mut(d.max(1))
            .zip(self.weight_sum.par_iter())
            .enumerate()
            .for_each(|(i, (out, &w))| {
                if w > 0.0 && d > 0 {
                    for (o, s) in out.iter_mut().zip(&self.feature_sum[i * d..(i + 1) * d]) {
                        *o = (s / w) as f32;
                    }
                }
            });
        Finalized {
            dim: d,
            features,
            active: self.weight_sum.iter().map(|&w| w > 0.0).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Finalized {
    pub dim: usize,
    pub features: Vec<f32>,
    pub active: Vec<bool>,
}

impl Finalized {
    pub fn feature(&self, index: usize) -> &[f32] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn active_count(&self) -> usize {
        self.active.iter().filter(|&&a| a).count()
    }
}

/// Keeps the Gaussians with positive weight sum. The returned map sends each
/// original index to its index in the filtered scene.
pub fn filter_inactive(scene: &GaussianScene, acc: &UpliftAccumulator) -> (GaussianScene, Vec<Option<usize>>) {
    let keep: Vec<usize> = (0..scene.len()).filter(|&i| acc.is_active(i)).collect();
    let mut index_map = vec![None; scene.len()];
    for (new, &old) in keep.iter().enumerate() {
        index_map[old] = Some(new);
    }
    (scene.subset(&keep), index_map)
}

#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct UpliftStats {
    pub n_views: usize,
    /// Gaussians in the input scene (N).
    pub n_input: usize,
    /// Gaussians in the output scene (M).
    pub n_output: usize,
    pub n_active: usize,
    pub render_passes: usize,
    pub samples: usize,
}

#[derive(Clone, Debug)]
pub struct UpliftOutcome {
    /// Input geometry with uplifted features, filtered when requested.
    pub scene: GaussianScene,
    /// Original index -> output index.
    pub index_map: Vec<Option<usize>>,
    /// Per input Gaussian total observation weight.
    pub weight_sum: Vec<f64>,
    pub stats: UpliftStats,
}

pub(crate) fn check_inputs(scene: &GaussianScene, views: &[CameraView], maps: &[FeatureMap]) -> Result<usize> {
    if scene.is_empty() {
        return Err(Error::EmptyScene);
    }
    if views.len() != maps.len() {
        return Err(Error::ViewMapCount {
            views: views.len(),
            maps: maps.len(),
        });
    }
    let d = maps.first().map(FeatureMap::dim).unwrap_or(0);
    if d == 0 {
        return Err(Error::InvalidConfig("feature maps must have dimension > 0".into()));
    }
    for m in maps {
        if m.dim() != d {
            return Err(Error::DimensionMismatch {
                expected: d,
                actual: m.dim(),
            });
        }
    }
    for (v, m) in views.iter().zip(maps) {
        v.validate(CameraView::ORTHONORMAL_TOL)?;
        m.check_aspect(v.width, v.height)?;
    }
    Ok(d)
}

/// Builds the accumulator with exactly one render pass per view. Views are
/// accumulated in input order in both modes, so the result is bit-identical
/// whether or not sample collection runs in parallel.
pub fn accumulate_views(
    scene: &GaussianScene,
    views: &[CameraView],
    maps: &[FeatureMap],
    cfg: &UpliftConfig,
) -> Result<(UpliftAccumulator, UpliftStats)> {
    cfg.validate()?;
    let d = check_inputs(scene, views, maps)?;
    let mut acc = UpliftAccumulator::new(scene.len(), d);
    let mut stats = UpliftStats {
        n_views: views.len(),
        n_input: scene.len(),
        ..Default::default()
    };

    let collect = |v: usize| -> Result<Vec<CenterSample<'_>>> {
        let frame = Frame::new(scene, &views[v], &cfg.raster)?;
        frame.center_samples(&maps[v], v, cfg.occlusion_threshold)
    };

    if cfg.deterministic {
        for v in 0..views.len() {
            let samples = collect(v)?;
            stats.render_passes += 1;
            stats.samples += samples.len();
            acc.accumulate(&samples, cfg.weighted)?;
        }
    } else {
        let batch = rayon::current_num_threads().max(1);
        for start in (0..views.len()).step_by(batch) {
            let end = (start + batch).min(views.len());
            let per_view: Vec<Result<Vec<CenterSample<'_>>>> = (start..end).into_par_iter().map(collect).collect();
            for samples in per_view {
                let samples = samples?;
                stats.render_passes += 1;
                stats.samples += samples.len();
                acc.accumulate(&samples, cfg.weighted)?;
            }
        }
    }
    Ok((acc, stats))
}

/// End-to-end uplifting of one feature level.
pub fn uplift_scene(
    scene: &GaussianScene,
    views: &[CameraView],
    maps: &[FeatureMap],
    cfg: &UpliftConfig,
) -> Result<UpliftOutcome> {
    let (acc, mut stats) = accumulate_views(scene, views, maps, cfg)?;
    let fin = acc.finalize();
    stats.n_active = fin.active_count();

    let mut semantic = scene.clone();
    semantic.set_features(fin.dim, fin.features)?;
    let (scene_out, index_map) = if cfg.filter {
        filter_inactive(&semantic, &acc)
    } else {
        (semantic, (0..scene.len()).map(Some).collect())
    };
    stats.n_output = scene_out.len();
    Ok(UpliftOutcome {
        scene: scene_out,
        index_map,
        weight_sum: acc.weight_sum().to_vec(),
        stats,
    })
}

/// Feature hierarchy level; each level is uplifted independently.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Level {
    Whole,
    Part,
    Subpart,
}

impl Level {
    pub const ALL: [Level; 3] = [Level::Whole, Level::Part, Level::Subpart];

    pub fn name(self) -> &'static str {
        match self {
            Level::Whole => "whole",
            Level::Part => "part",
            Level::Subpart => "subpart",
        }
    }

    pub fn parse(s: &str) -> Option<Level> {
        Level::ALL.into_iter().find(|l| l.name() == s)
    }
}

impl std::fmt::Display for Level {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.name())
    }
}

/// Uplifts several levels against the same geometry and cameras.
pub fn uplift_levels(
    method: &dyn UpliftMethod,
    scene: &GaussianScene,
    views: &[CameraView],
    levels: &[(Level, Vec<FeatureMap>)],
    cfg: &UpliftConfig,
) -> Result<Vec<(Level, UpliftOutcome)>> {
    levels
        .iter()
        .map(|(level, maps)| Ok((*level, method.uplift(scene, views, maps, cfg)?)))
        .collect()
}

/// A way of turning per-view 2D feature maps into per-Gaussian features.
pub trait UpliftMethod: Send + Sync {
    fn name(&self) -> &'static str;

    fn uplift(
        &self,
        scene: &GaussianScene,
        views: &[CameraView],
        maps: &[FeatureMap],
        cfg: &UpliftConfig,
    ) -> Result<UpliftOutcome>;
}

/// Blending-weighted mean of center samples.
pub struct WeightedCenter;

/// Unit-weight mean of center samples (plain back-projection ablation).
pub struct UnweightedCenter;

impl UpliftMethod for WeightedCenter {
    fn name(&self) -> &'static str {
        "weighted"
    }

    fn uplift(
        &self,
        scene: &GaussianScene,
        views: &[CameraView],
        maps: &[FeatureMap],
        cfg: &UpliftConfig,
    ) -> Result<UpliftOutcome> {
        uplift_scene(scene, views, maps, &UpliftConfig { weighted: true, ..*cfg })
    }
}

impl UpliftMethod for UnweightedCenter {
    fn name(&self) -> &'static str {
        "unweighted"
    }

    fn uplift(
        &self,
        scene: &GaussianScene,
        views: &[CameraView],
        maps: &[FeatureMap],
        cfg: &UpliftConfig,
    ) -> Result<UpliftOutcome> {
        uplift_scene(
            scene,
            views,
            maps,
            &UpliftConfig {
                weighted: false,
                ..*cfg
            },
        )
    }
}

pub fn method_registry() -> Registry<dyn UpliftMethod> {
    let mut reg: Registry<dyn UpliftMethod> = Registry::new("uplift method");
    reg.register("weighted", "blending-weighted mean of center-pixel features", |_| {
        Ok(Box::new(WeightedCenter))
    });
    reg.register("unweighted", "unit-weight mean of center-pixel features", |_| {
        Ok(Box::new(UnweightedCenter))
    });
    reg.register(
        "exact-ml",
        "full least-squares solve over every influenced pixel (small scenes only)",
        |_| Ok(Box::new(crate::oracle::ExactMl)),
    );
    reg
}

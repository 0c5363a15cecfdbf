//! Scaling benchmark: uplift runtime, render rate, memory estimate and output
//! size over a grid of scene sizes, view counts and feature dimensions.

use std::path::Path;
use std::time::Instant;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::io::{decode_feature_map, encode_feature_map, encode_ply, property_names};
use crate::raster::{render_color, RasterConfig};
use crate::synth::{generate_feature_maps, generate_scene, Layout, SynthSpec};
use crate::uplift::{uplift_scene, UpliftConfig};

#[derive(Clone, Debug, PartialEq)]
pub struct BenchConfig {
    pub n_gaussians: Vec<usize>,
    pub n_views: Vec<usize>,
    pub dims: Vec<usize>,
    pub width: usize,
    pub height: usize,
    /// Timed repetitions per configuration; the median is reported.
    pub repeats: usize,
    pub seed: u64,
    pub uplift: UpliftConfig,
}

impl Default for BenchConfig {
    fn default() -> Self {
        BenchConfig {
            n_gaussians: vec![1000],
            n_views: vec![8],
            dims: vec![16],
            width: 512,
            height: 512,
            repeats: 3,
            seed: 0,
            uplift: UpliftConfig::default(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct BenchRow {
    pub n_gaussians: usize,
    pub n_views: usize,
    pub dim: usize,
    pub width: usize,
    pub height: usize,
    /// Decoding the encoded per-view feature maps plus aggregation, as done
    /// by the `uplift` command after reading the files.
    pub uplift_seconds: f64,
    /// Aggregation over maps already in memory.
    pub aggregate_seconds: f64,
    pub render_fps: f64,
    pub memory_bytes: usize,
    pub output_bytes: usize,
}

pub fn median(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len();
    match n {
        0 => f64::NAN,
        _ if n % 2 == 1 => xs[n / 2],
        _ => 0.5 * (xs[n / 2 - 1] + xs[n / 2]),
    }
}

/// Bytes held during uplifting: scene parameters, input maps, the
/// accumulator and the output features.
pub fn memory_estimate(n: usize, sh_degree: u8, views: usize, width: usize, height: usize, dim: usize) -> usize {
    let params = n * (property_names(sh_degree, 0).len() * 8);
    let maps = views * width * height * dim * 4;
    let accumulator = n * (dim + 1) * 8 + n * 4;
    let output = n * dim * 4;
    params + maps + accumulator + output
}

pub fn run_one(n: usize, views: usize, dim: usize, cfg: &BenchConfig) -> Result<BenchRow> {
    let spec = SynthSpec {
        n_gaussians: n,
        layout: Layout::Random,
        dim,
        n_views: views,
        seed: cfg.seed,
        width: cfg.width,
        height: cfg.height,
        ..Default::default()
    };
    let synth = generate_scene(&spec)?;
    let maps = generate_feature_maps(&synth.scene, &synth.views, 0.0, cfg.seed, &cfg.uplift.raster)?;
    let mut geometry = synth.scene.clone();
    geometry.clear_features();

    let encoded: Vec<Vec<u8>> = maps.iter().map(encode_feature_map).collect();
    let source = Path::new("<memory>");
    let end_to_end = || -> Result<_> {
        let decoded = encoded
            .iter()
            .map(|b| decode_feature_map(b, source))
            .collect::<Result<Vec<_>>>()?;
        uplift_scene(&geometry, &synth.views, &decoded, &cfg.uplift)
    };

    // Untimed warm-up so the first configuration does not pay for cold caches.
    end_to_end()?;
    let mut times = Vec::with_capacity(cfg.repeats);
    let mut aggregate_times = Vec::with_capacity(cfg.repeats);
    let mut out = None;
    for _ in 0..cfg.repeats {
        let t0 = Instant::now();
        let r = end_to_end()?;
        times.push(t0.elapsed().as_secs_f64());
        let t0 = Instant::now();
        uplift_scene(&geometry, &synth.views, &maps, &cfg.uplift)?;
        aggregate_times.push(t0.elapsed().as_secs_f64());
        out = Some(r);
    }
    let out = out.expect("repeats >= 1");

    let raster = RasterConfig::default();
    let mut render_times = Vec::with_capacity(cfg.repeats);
    for _ in 0..cfg.repeats {
        let t0 = Instant::now();
        render_color(&out.scene, &synth.views[0], &raster)?;
        render_times.push(t0.elapsed().as_secs_f64());
    }

    Ok(BenchRow {
        n_gaussians: n,
        n_views: views,
        dim,
        width: cfg.width,
        height: cfg.height,
        uplift_seconds: median(times),
        aggregate_seconds: median(aggregate_times),
        render_fps: 1.0 / median(render_times).max(1e-9),
        memory_bytes: memory_estimate(n, geometry.sh_degree(), views, cfg.width, cfg.height, dim),
        output_bytes: encode_ply(&out.scene).len(),
    })
}

/// One row per `(n_gaussians, n_views, dim)` combination.
pub fn run(cfg: &BenchConfig) -> Result<Vec<BenchRow>> {
    if cfg.repeats == 0 || cfg.n_gaussians.is_empty() || cfg.n_views.is_empty() || cfg.dims.is_empty() {
        return Err(Error::InvalidConfig(
            "bench needs at least one value per axis and one repeat".into(),
        ));
    }
    let mut rows = Vec::new();
    for &n in &cfg.n_gaussians {
        for &v in &cfg.n_views {
            for &d in &cfg.dims {
                rows.push(run_one(n, v, d, cfg)?);
            }
        }
    }
    Ok(rows)
}

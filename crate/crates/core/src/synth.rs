//! Seeded synthetic scenes, camera rigs and feature maps for testing the
//! uplifting pipeline against known ground truth.
//!
//! Two rigs are used. The lattice rig keeps every camera fronto-parallel with
//! identity rotation and places Gaussians on the `z = 0` plane at positions
//! that are exact dyadic multiples of the pixel footprint, so projected
//! centers land exactly on integer pixel coordinates. The orbit rig places
//! `look_at` cameras on a sphere around the origin.

use nalgebra::{Matrix3, Rotation3, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::raster::{compute_alpha, project_gaussian, render_features, RasterConfig};
use crate::scene::{Gaussian, GaussianScene};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Layout {
    /// Well separated Gaussians on a lattice rig.
    Grid,
    /// Uniform positions in a cube, orbit rig.
    Random,
    /// Front/back pairs along the viewing direction, lattice rig.
    StackedPairs,
    /// Visible layer, two wall Gaussians and a hidden subset behind them.
    Occluder,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SynthSpec {
    pub n_gaussians: usize,
    pub layout: Layout,
    pub dim: usize,
    pub n_views: usize,
    /// Opacities are drawn uniformly from `[lo, hi]`.
    pub opacity_range: [f64; 2],
    /// Footprint growth factor; 0 keeps the layout's base size.
    pub overlap: f64,
    pub seed: u64,
    pub width: usize,
    pub height: usize,
    /// Fraction of Gaussians hidden behind the walls (occluder layout).
    pub hidden_fraction: f64,
    /// One-hot ground-truth features (`i % dim`) instead of uniform ones.
    pub one_hot: bool,
}

impl Default for SynthSpec {
    fn default() -> Self {
        SynthSpec {
            n_gaussians: 64,
            layout: Layout::Grid,
            dim: 8,
            n_views: 8,
            opacity_range: [0.6, 0.95],
            overlap: 0.0,
            seed: 0,
            width: 128,
            height: 128,
            hidden_fraction: 0.2,
            one_hot: false,
        }
    }
}

impl SynthSpec {
    pub fn validate(&self) -> Result<()> {
        let [lo, hi] = self.opacity_range;
        let bad = |m: &str| Err(Error::InvalidConfig(format!("synth spec: {m}")));
        if self.n_gaussians == 0 {
            return bad("n_gaussians must be at least 1");
        }
        if self.dim == 0 || self.n_views == 0 {
            return bad("dim and n_views must be positive");
        }
        if !(lo > 0.0 && lo <= hi && hi < 1.0) {
            return bad("opacity range must satisfy 0 < lo <= hi < 1");
        }
        if !(self.overlap >= 0.0 && self.overlap.is_finite()) {
            return bad("overlap must be finite and non-negative");
        }
        if self.width < 16 || self.height < 16 {
            return bad("image must be at least 16x16");
        }
        if !(0.0..1.0).contains(&self.hidden_fraction) {
            return bad("hidden_fraction must lie in [0, 1)");
        }
        Ok(())
    }
}

/// Generated scene with ground-truth features and its cameras.
#[derive(Clone, Debug, PartialEq)]
pub struct SynthScene {
    pub scene: GaussianScene,
    pub views: Vec<CameraView>,
    /// Gaussians constructed to be invisible from every view.
    pub hidden: Vec<usize>,
}

/// Grid layout constants, in pixels.
pub const GRID_SPACING_PX: f64 = 12.0;
pub const GRID_SIGMA_PX: f64 = 1.5;
/// Largest per-view camera shift on the lattice rig, in pixels.
pub const LATTICE_MAX_SHIFT: i32 = 8;
/// World size of one pixel on the lattice rig's `z = 0` plane.
const LATTICE_UNIT: f64 = 1.0 / 32.0;

struct Lattice {
    focal: f64,
    depth: f64,
}

impl Lattice {
    fn new(width: usize) -> Self {
        let focal = (width / 2) as f64;
        Lattice {
            focal,
            depth: focal * LATTICE_UNIT,
        }
    }

    fn cameras(&self, spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Vec<CameraView> {
        (0..spec.n_views)
            .map(|v| {
                let (sx, sy) = if v == 0 {
                    (0, 0)
                } else {
                    (
                        rng.random_range(-LATTICE_MAX_SHIFT..=LATTICE_MAX_SHIFT),
                        rng.random_range(-LATTICE_MAX_SHIFT..=LATTICE_MAX_SHIFT),
                    )
                };
                CameraView {
                    id: format!("view_{v:03}"),
                    width: spec.width,
                    height: spec.height,
                    fx: self.focal,
                    fy: self.focal,
                    cx: (spec.width / 2) as f64,
                    cy: (spec.height / 2) as f64,
                    rotation: Matrix3::identity(),
                    translation: Vector3::new(sx as f64 * LATTICE_UNIT, sy as f64 * LATTICE_UNIT, self.depth),
                }
            })
            .collect()
    }

    /// World point on `z = z` seen `(px, py)` pixels from the image center by
    /// the unshifted camera.
    fn point(&self, px: f64, py: f64, z: f64) -> Vector3<f64> {
        let scale = (self.depth + z) / self.depth;
        Vector3::new(px * LATTICE_UNIT * scale, py * LATTICE_UNIT * scale, z)
    }
}

fn orbit_camera(id: String, spec: &SynthSpec, radius: f64, azimuth: f64, elevation: f64, focal: f64) -> CameraView {
    let rot = Rotation3::from_axis_angle(&Vector3::y_axis(), azimuth)
        * Rotation3::from_axis_angle(&Vector3::x_axis(), elevation);
    let eye = rot * Vector3::new(0.0, 0.0, -radius);
    CameraView::look_at(
        id,
        spec.width,
        spec.height,
        focal,
        eye,
        Vector3::zeros(),
        Vector3::new(0.0, -1.0, 0.0),
    )
}

fn random_rgb(rng: &mut ChaCha8Rng) -> [f64; 3] {
    [rng.random(), rng.random(), rng.random()]
}

fn opacity(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> f64 {
    let [lo, hi] = spec.opacity_range;
    if lo == hi {
        lo
    } else {
        rng.random_range(lo..=hi)
    }
}

fn ground_truth(spec: &SynthSpec, n: usize, rng: &mut ChaCha8Rng) -> Vec<f32> {
    let mut out = vec![0f32; n * spec.dim];
    for (i, row) in out.chunks_mut(spec.dim).enumerate() {
        if spec.one_hot {
            row[i % spec.dim] = 1.0;
        } else {
            row.iter_mut().for_each(|v| *v = rng.random_range(-1.0f32..1.0));
        }
    }
    out
}

/// Pixel offsets (relative to the image center) of a centered grid.
fn grid_offsets(n: usize, spacing: f64) -> (Vec<(f64, f64)>, f64, f64) {
    let cols = (n as f64).sqrt().ceil() as usize;
    let rows = n.div_ceil(cols);
    let offs = (0..n)
        .map(|i| {
            let (c, r) = ((i % cols) as f64, (i / cols) as f64);
            (
                (c - (cols - 1) as f64 / 2.0) * spacing,
                (r - (rows - 1) as f64 / 2.0) * spacing,
            )
        })
        .collect();
    (offs, (cols - 1) as f64 * spacing, (rows - 1) as f64 * spacing)
}

fn check_fits(spec: &SynthSpec, extent_x: f64, extent_y: f64, margin: f64, what: &str) -> Result<()> {
    if extent_x + 2.0 * margin > spec.width as f64 || extent_y + 2.0 * margin > spec.height as f64 {
        return Err(Error::InfeasibleLayout(format!(
            "{} {what} need {:.0}x{:.0} px but the image is {}x{}",
            spec.n_gaussians,
            extent_x + 2.0 * margin,
            extent_y + 2.0 * margin,
            spec.width,
            spec.height
        )));
    }
    Ok(())
}

fn footprint_radius(sigma_px: f64) -> f64 {
    3.0 * (sigma_px * sigma_px + RasterConfig::default().low_pass).sqrt()
}

fn grid(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<SynthScene> {
    let lat = Lattice::new(spec.width);
    let (offs, ex, ey) = grid_offsets(spec.n_gaussians, GRID_SPACING_PX);
    let margin = LATTICE_MAX_SHIFT as f64 + footprint_radius(GRID_SIGMA_PX) + 1.0;
    check_fits(spec, ex, ey, margin, "grid gaussians")?;
    let views = lat.cameras(spec, rng);
    let gaussians = offs
        .iter()
        .map(|&(px, py)| {
            Gaussian::isotropic(
                lat.point(px, py, 0.0),
                GRID_SIGMA_PX * LATTICE_UNIT,
                opacity(spec, rng),
                random_rgb(rng),
            )
        })
        .collect::<Result<Vec<_>>>()?;
    let feats = ground_truth(spec, gaussians.len(), rng);
    Ok(SynthScene {
        scene: GaussianScene::with_features(gaussians, spec.dim, feats)?,
        views,
        hidden: Vec::new(),
    })
}

fn stacked_pairs(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<SynthScene> {
    const BACK_DEPTH: f64 = 0.25;
    let lat = Lattice::new(spec.width);
    let n_pairs = spec.n_gaussians.div_ceil(2);
    let sigma_back = GRID_SIGMA_PX * (1.0 + spec.overlap);
    let spacing = GRID_SPACING_PX.max(2.0 * footprint_radius(sigma_back) + 2.0).ceil();
    let (offs, ex, ey) = grid_offsets(n_pairs, spacing);
    let margin = LATTICE_MAX_SHIFT as f64 + footprint_radius(sigma_back) + 1.0;
    check_fits(spec, ex, ey, margin, "stacked gaussians")?;
    let views = lat.cameras(spec, rng);
    let mut gaussians = Vec::with_capacity(spec.n_gaussians);
    for &(px, py) in &offs {
        gaussians.push(Gaussian::isotropic(
            lat.point(px, py, 0.0),
            GRID_SIGMA_PX * LATTICE_UNIT,
            opacity(spec, rng),
            random_rgb(rng),
        )?);
        if gaussians.len() < spec.n_gaussians {
            let back = lat.point(px, py, BACK_DEPTH);
            let sigma = sigma_back * LATTICE_UNIT * (lat.depth + BACK_DEPTH) / lat.depth;
            gaussians.push(Gaussian::isotropic(back, sigma, opacity(spec, rng), random_rgb(rng))?);
        }
    }
    let feats = ground_truth(spec, gaussians.len(), rng);
    Ok(SynthScene {
        scene: GaussianScene::with_features(gaussians, spec.dim, feats)?,
        views,
        hidden: Vec::new(),
    })
}

fn random_layout(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<SynthScene> {
    let focal = 0.8 * spec.width as f64;
    let views = (0..spec.n_views)
        .map(|v| {
            let az = std::f64::consts::TAU * v as f64 / spec.n_views as f64 + rng.random_range(-0.1..0.1);
            let el = rng.random_range(-0.5..0.5);
            orbit_camera(format!("view_{v:03}"), spec, 4.0, az, el, focal)
        })
        .collect();
    let sigma = 0.04 * (1.0 + spec.overlap);
    let gaussians = (0..spec.n_gaussians)
        .map(|_| {
            let p = Vector3::new(
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
                rng.random_range(-0.8..0.8),
            );
            Gaussian::isotropic(p, sigma, opacity(spec, rng), random_rgb(rng))
        })
        .collect::<Result<Vec<_>>>()?;
    let feats = ground_truth(spec, gaussians.len(), rng);
    Ok(SynthScene {
        scene: GaussianScene::with_features(gaussians, spec.dim, feats)?,
        views,
        hidden: Vec::new(),
    })
}

/// Occluder layout, front to back:
/// - visible Gaussians at `z = -1.2`, kept away from the image center;
/// - one veil per hidden Gaussian at `z = -0.8`, directly in front of it;
/// - two wide flat walls at `z = -0.6` and `z = -0.4`, centered on the axis;
/// - the hidden Gaussians at `z = -0.1`, on an annulus around the center.
///
/// Within the annulus each wall reaches the alpha clamp, so two walls plus a
/// veil drive transmittance below the early-stop level before any hidden
/// Gaussian is reached. Cameras stay within a narrow cone so the veils keep
/// covering their hidden partner and the layers keep their depth order.
fn occluder(spec: &SynthSpec, rng: &mut ChaCha8Rng) -> Result<SynthScene> {
    const RADIUS: f64 = 4.0;
    const Z_VISIBLE: f64 = -1.2;
    const Z_VEIL: f64 = -0.8;
    const Z_WALLS: [f64; 2] = [-0.6, -0.4];
    const Z_HIDDEN: f64 = -0.1;
    const VEIL_SIGMA_PX: f64 = 3.5;
    const HIDDEN_SIGMA_PX: f64 = 1.0;
    const VEIL_SPACING_PX: f64 = 8.0;
    const ANNULUS_PX: (f64, f64) = (16.0, 40.0);
    const CENTER_CLEAR_PX: f64 = 12.0;

    let n = spec.n_gaussians;
    let n_hidden = (spec.hidden_fraction * n as f64).round() as usize;
    let n_visible = n.checked_sub(2 * n_hidden + 2).ok_or_else(|| {
        Error::InfeasibleLayout(format!(
            "{n} gaussians cannot hold {n_hidden} hidden ones, their veils and two walls"
        ))
    })?;

    let focal = spec.width as f64;
    let views: Vec<CameraView> = (0..spec.n_views)
        .map(|v| {
            let (az, el) = if v == 0 {
                (0.0, 0.0)
            } else {
                (rng.random_range(-0.08..0.08), rng.random_range(-0.06..0.06))
            };
            orbit_camera(format!("view_{v:03}"), spec, RADIUS, az, el, focal)
        })
        .collect();
    let (cx, cy) = (spec.width as f64 / 2.0, spec.height as f64 / 2.0);
    // reference camera looks along +z from (0, 0, -RADIUS)
    let to_world = |px: f64, py: f64, z: f64| {
        let depth = z + RADIUS;
        Vector3::new(px * depth / focal, py * depth / focal, z)
    };

    let mut sites: Vec<(f64, f64)> = Vec::new();
    let k = (ANNULUS_PX.1 / VEIL_SPACING_PX).floor() as i32;
    for iy in -k..=k {
        for ix in -k..=k {
            let (px, py) = (ix as f64 * VEIL_SPACING_PX, iy as f64 * VEIL_SPACING_PX);
            let r = px.hypot(py);
            if r >= ANNULUS_PX.0
                && r <= ANNULUS_PX.1
                && px.abs() + cx < spec.width as f64
                && py.abs() + cy < spec.height as f64
            {
                sites.push((px, py));
            }
        }
    }
    if sites.len() < n_hidden {
        return Err(Error::InfeasibleLayout(format!(
            "{n_hidden} hidden gaussians exceed {} occluded sites",
            sites.len()
        )));
    }
    for i in (1..sites.len()).rev() {
        sites.swap(i, rng.random_range(0..=i));
    }
    sites.truncate(n_hidden);

    let sigma_visible_px = GRID_SIGMA_PX * (1.0 + spec.overlap);
    let spacing = GRID_SPACING_PX / (1.0 + spec.overlap).sqrt();
    let margin = footprint_radius(sigma_visible_px) + 4.0;
    let mut visible_sites = Vec::new();
    let kx = ((cx - margin) / spacing).floor() as i32;
    let ky = ((cy - margin) / spacing).floor() as i32;
    for iy in -ky..=ky {
        for ix in -kx..=kx {
            let (px, py) = (ix as f64 * spacing + spacing / 2.0, iy as f64 * spacing + spacing / 2.0);
            if px.hypot(py) > CENTER_CLEAR_PX + footprint_radius(sigma_visible_px)
                && px.abs() + margin <= cx
                && py.abs() + margin <= cy
            {
                visible_sites.push((px, py));
            }
        }
    }
    if visible_sites.len() < n_visible {
        return Err(Error::InfeasibleLayout(format!(
            "{n_visible} visible gaussians exceed {} free sites",
            visible_sites.len()
        )));
    }
    for i in (1..visible_sites.len()).rev() {
        visible_sites.swap(i, rng.random_range(0..=i));
    }

    let px_sigma = |sigma_px: f64, z: f64| sigma_px * (z + RADIUS) / focal;
    let mut gaussians = Vec::with_capacity(n);
    for &(px, py) in visible_sites.iter().take(n_visible) {
        let z = Z_VISIBLE + rng.random_range(-0.1..0.1);
        gaussians.push(Gaussian::isotropic(
            to_world(px, py, z),
            px_sigma(sigma_visible_px, z),
            opacity(spec, rng),
            random_rgb(rng),
        )?);
    }
    for &(px, py) in &sites {
        gaussians.push(Gaussian::isotropic(
            to_world(px, py, Z_VEIL),
            px_sigma(VEIL_SIGMA_PX, Z_VEIL),
            0.95,
            random_rgb(rng),
        )?);
    }
    for z in Z_WALLS {
        gaussians.push(Gaussian::new(
            Vector3::new(0.0, 0.0, z),
            Vector3::new(20.0, 20.0, 0.01),
            nalgebra::Quaternion::identity(),
            0.9999,
            vec![crate::sh::dc_from_rgb(random_rgb(rng))],
        )?);
    }
    let first_hidden = gaussians.len();
    for &(px, py) in &sites {
        gaussians.push(Gaussian::isotropic(
            to_world(px, py, Z_HIDDEN),
            px_sigma(HIDDEN_SIGMA_PX, Z_HIDDEN),
            opacity(spec, rng),
            random_rgb(rng),
        )?);
    }
    let feats = ground_truth(spec, gaussians.len(), rng);
    Ok(SynthScene {
        scene: GaussianScene::with_features(gaussians, spec.dim, feats)?,
        views,
        hidden: (first_hidden..n).collect(),
    })
}

/// Extra ground-truth feature sets for the same geometry, e.g. one per
/// hierarchy level. Each `stream` is independent of the others and of the
/// features generated with the scene.
pub fn ground_truth_features(spec: &SynthSpec, n: usize, stream: u64) -> Vec<f32> {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream(stream + 1);
    ground_truth(spec, n, &mut rng)
}

/// Deterministic in `spec.seed`.
pub fn generate_scene(spec: &SynthSpec) -> Result<SynthScene> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    match spec.layout {
        Layout::Grid => grid(spec, &mut rng),
        Layout::Random => random_layout(spec, &mut rng),
        Layout::StackedPairs => stacked_pairs(spec, &mut rng),
        Layout::Occluder => occluder(spec, &mut rng),
    }
}

/// Seed for view `v`'s noise stream; independent of the other views so maps
/// can be produced in any order.
fn view_seed(seed: u64, v: usize) -> u64 {
    seed ^ (v as u64 + 1).wrapping_mul(0x9E37_79B9_7F4A_7C15)
}

/// Renders the ground-truth features from every view and adds IID normal
/// noise of standard deviation `noise_sigma` to every channel.
pub fn generate_feature_maps(
    scene: &GaussianScene,
    views: &[CameraView],
    noise_sigma: f64,
    seed: u64,
    cfg: &RasterConfig,
) -> Result<Vec<FeatureMap>> {
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidConfig(format!(
            "noise sigma {noise_sigma} must be finite and non-negative"
        )));
    }
    views
        .par_iter()
        .enumerate()
        .map(|(v, cam)| {
            let mut map = render_features(scene, cam, cfg)?;
            if noise_sigma > 0.0 {
                let mut rng = ChaCha8Rng::seed_from_u64(view_seed(seed, v));
                let normal = Normal::new(0.0, noise_sigma).expect("valid sigma");
                for x in map.data_mut() {
                    *x += normal.sample(&mut rng) as f32;
                }
            }
            Ok(map)
        })
        .collect()
}

/// Largest blending weight each Gaussian reaches at any pixel of any view,
/// computed by blending every Gaussian at every pixel without tile culling.
pub fn max_weight_oracle(scene: &GaussianScene, views: &[CameraView], cfg: &RasterConfig) -> Vec<f64> {
    let per_view: Vec<Vec<f64>> = views
        .par_iter()
        .map(|cam| {
            let mut projected: Vec<_> = scene
                .gaussians
                .iter()
                .enumerate()
                .filter_map(|(i, g)| project_gaussian(i, g, cam, cfg))
                .collect();
            projected.sort_by(|a, b| {
                a.depth
                    .total_cmp(&b.depth)
                    .then(a.gaussian_index.cmp(&b.gaussian_index))
            });
            let mut best = vec![0f64; scene.len()];
            for y in 0..cam.height {
                for x in 0..cam.width {
                    let mut t = 1.0;
                    for p in &projected {
                        let a = compute_alpha(p, [x as f64, y as f64], cfg);
                        if a == 0.0 {
                            continue;
                        }
                        best[p.gaussian_index] = best[p.gaussian_index].max(a * t);
                        t *= 1.0 - a;
                        if t < cfg.transmittance_min {
                            break;
                        }
                    }
                }
            }
            best
        })
        .collect();
    let mut out = vec![0f64; scene.len()];
    for v in per_view {
        for (o, w) in out.iter_mut().zip(v) {
            *o = o.max(w);
        }
    }
    out
}

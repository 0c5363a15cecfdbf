//! Exact maximum-likelihood feature estimation for desk-scale scenes.
//!
//! Under the additive Gaussian noise model `F(p, v) = sum_k w_kpv f_k + noise`,
//! the ML features solve the normal equations `A F = B` with
//! `A[i][k] = sum_{v,p} w_ipv w_kpv` and `B[i] = sum_{v,p} w_ipv F(p, v)`.
//! The closed-form aggregation drops the off-diagonal (cross-talk) terms and
//! linearizes `w^2` to `w`; this module solves the full system so that the
//! approximation can be measured.

use nalgebra::{DMatrix, SymmetricEigen};
use rayon::prelude::*;

use crate::camera::CameraView;
use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::raster::{Frame, RasterConfig};
use crate::scene::GaussianScene;
use crate::uplift::{check_inputs, UpliftConfig, UpliftMethod, UpliftOutcome, UpliftStats};

/// Observations of one view and the center pixel of every Gaussian in it.
type ViewRecord = (Vec<PixelObservation>, Vec<Option<[u32; 2]>>);

pub const MAX_GAUSSIANS: usize = 2000;
pub const MAX_PIXELS: usize = 1_000_000;
/// Per-pixel weights below this are not recorded.
pub const MIN_RECORDED_WEIGHT: f64 = 1e-8;

#[derive(Clone, Debug, PartialEq)]
pub struct PixelObservation {
    pub view: u32,
    pub pixel: [u32; 2],
    /// `(gaussian index, blending weight)` in front-to-back order.
    pub weights: Vec<(u32, f64)>,
    /// Observed 2D feature at this pixel.
    pub feature: Vec<f32>,
}

/// Every recorded per-pixel weight of every view, with the observed features.
#[derive(Clone, Debug, PartialEq)]
pub struct DenseWeightRecord {
    pub n_gaussians: usize,
    pub dim: usize,
    pub pixels: Vec<PixelObservation>,
    /// `centers[v][i]`: pixel holding Gaussian `i`'s projected center in view `v`.
    pub centers: Vec<Vec<Option<[u32; 2]>>>,
}

impl DenseWeightRecord {
    pub fn new(n_gaussians: usize, dim: usize, n_views: usize) -> Self {
        DenseWeightRecord {
            n_gaussians,
            dim,
            pixels: Vec::new(),
            centers: vec![vec![None; n_gaussians]; n_views],
        }
    }

    pub fn push(&mut self, obs: PixelObservation) -> Result<()> {
        if obs.feature.len() != self.dim {
            return Err(Error::DimensionMismatch {
                expected: self.dim,
                actual: obs.feature.len(),
            });
        }
        let total: f64 = obs.weights.iter().map(|w| w.1).sum();
        if total > 1.0 + 1e-5
            || obs
                .weights
                .iter()
                .any(|&(k, w)| k as usize >= self.n_gaussians || w < 0.0)
        {
            return Err(Error::InvalidConfig(format!(
                "pixel {:?} of view {} has invalid weights (sum {total})",
                obs.pixel, obs.view
            )));
        }
        self.pixels.push(obs);
        Ok(())
    }

    fn is_center(&self, obs: &PixelObservation, gaussian: u32) -> bool {
        self.centers
            .get(obs.view as usize)
            .and_then(|c| c[gaussian as usize])
            .is_some_and(|c| c == obs.pixel)
    }
}

pub fn collect_dense_weights(
    scene: &GaussianScene,
    views: &[CameraView],
    maps: &[FeatureMap],
    cfg: &RasterConfig,
) -> Result<DenseWeightRecord> {
    let d = check_inputs(scene, views, maps)?;
    if scene.len() > MAX_GAUSSIANS {
        return Err(Error::ScaleGuard(format!(
            "{} gaussians > {MAX_GAUSSIANS}",
            scene.len()
        )));
    }
    let total_pixels: usize = views.iter().map(CameraView::pixel_count).sum();
    if total_pixels > MAX_PIXELS {
        return Err(Error::ScaleGuard(format!("{total_pixels} pixels > {MAX_PIXELS}")));
    }

    let per_view: Vec<Result<ViewRecord>> = views
        .par_iter()
        .zip(maps)
        .enumerate()
        .map(|(v, (cam, map))| {
            let frame = Frame::new(scene, cam, cfg)?;
            let (w, h) = (cam.width, cam.height);
            let mut centers = vec![None; scene.len()];
            for p in &frame.projected {
                let (x, y) = (p.mean2d.x.floor(), p.mean2d.y.floor());
                if x >= 0.0 && y >= 0.0 && x < w as f64 && y < h as f64 {
                    centers[p.gaussian_index] = Some([x as u32, y as u32]);
                }
            }
            let mut obs = Vec::new();
            for y in 0..h {
                for x in 0..w {
                    let mut weights = Vec::new();
                    frame.blend_pixel(x, y, |k, wt| {
                        if wt >= MIN_RECORDED_WEIGHT {
                            weights.push((frame.projected[k].gaussian_index as u32, wt));
                        }
                    });
                    if !weights.is_empty() {
                        obs.push(PixelObservation {
                            view: v as u32,
                            pixel: [x as u32, y as u32],
                            weights,
                            feature: map.sample(x, y, w, h).to_vec(),
                        });
                    }
                }
            }
            Ok((obs, centers))
        })
        .collect();

    let mut rec = DenseWeightRecord::new(scene.len(), d, views.len());
    for (v, r) in per_view.into_iter().enumerate() {
        let (obs, centers) = r?;
        rec.centers[v] = centers;
        for o in obs {
            rec.push(o)?;
        }
    }
    Ok(rec)
}

/// Which pixels the closed-form average draws from.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Support {
    /// Every pixel the Gaussian influences.
    AllPixels,
    /// Only the Gaussian's own center pixel in each view.
    CenterPixels,
}

#[derive(Clone, Debug, PartialEq)]
pub struct FeatureEstimate {
    pub dim: usize,
    pub features: Vec<f64>,
    /// Gaussians the estimate could not determine.
    pub unidentifiable: Vec<usize>,
    pub rank_deficient: bool,
}

impl FeatureEstimate {
    pub fn feature(&self, index: usize) -> &[f64] {
        &self.features[index * self.dim..(index + 1) * self.dim]
    }

    pub fn len(&self) -> usize {
        self.features.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn is_empty(&self) -> bool {
        self.features.is_empty()
    }
}

/// Weighted average `sum(w F) / sum(w)` evaluated on the dense record,
/// ignoring weights below `min_weight`.
pub fn closed_form(rec: &DenseWeightRecord, support: Support, min_weight: f64) -> FeatureEstimate {
    let d = rec.dim;
    let mut num = vec![0f64; rec.n_gaussians * d];
    let mut den = vec![0f64; rec.n_gaussians];
    for obs in &rec.pixels {
        for &(k, w) in &obs.weights {
            if w < min_weight || (support == Support::CenterPixels && !rec.is_center(obs, k)) {
                continue;
            }
            let i = k as usize;
            for (n, &f) in num[i * d..(i + 1) * d].iter_mut().zip(&obs.feature) {
                *n += w * f as f64;
            }
            den[i] += w;
        }
    }
    let mut unidentifiable = Vec::new();
    for i in 0..rec.n_gaussians {
        if den[i] > 0.0 {
            num[i * d..(i + 1) * d].iter_mut().for_each(|v| *v /= den[i]);
        } else {
            unidentifiable.push(i);
        }
    }
    FeatureEstimate {
        dim: d,
        features: num,
        unidentifiable,
        rank_deficient: false,
    }
}

struct UnionFind(Vec<usize>);

impl UnionFind {
    fn find(&mut self, mut i: usize) -> usize {
        while self.0[i] != i {
            self.0[i] = self.0[self.0[i]];
            i = self.0[i];
        }
        i
    }

    fn union(&mut self, a: usize, b: usize) {
        let (ra, rb) = (self.find(a), self.find(b));
        if ra != rb {
            self.0[ra.max(rb)] = ra.min(rb);
        }
    }
}

/// Relative eigenvalue cutoff used to declare the normal matrix singular.
const RANK_TOL: f64 = 1e-10;

/// Solves the full normal equations. The system decouples into connected
/// components of the cross-talk graph; singleton components reduce to the
/// scalar ratio `B[i] / A[i][i]`. Rank-deficient components get the
/// minimum-norm solution and their unresolved Gaussians are reported.
pub fn exact_ml_solve(rec: &DenseWeightRecord) -> FeatureEstimate {
    let n = rec.n_gaussians;
    let d = rec.dim;
    let mut a = vec![0f64; n * n];
    let mut b = vec![0f64; n * d];
    for obs in &rec.pixels {
        for &(i, wi) in &obs.weights {
            let i = i as usize;
            for (bv, &f) in b[i * d..(i + 1) * d].iter_mut().zip(&obs.feature) {
                *bv += wi * f as f64;
            }
            for &(k, wk) in &obs.weights {
                a[i * n + k as usize] += wi * wk;
            }
        }
    }

    let mut uf = UnionFind((0..n).collect());
    for i in 0..n {
        for k in i + 1..n {
            if a[i * n + k] != 0.0 {
                uf.union(i, k);
            }
        }
    }
    let mut components: Vec<Vec<usize>> = vec![Vec::new(); n];
    for i in 0..n {
        if a[i * n + i] > 0.0 {
            let r = uf.find(i);
            components[r].push(i);
        }
    }

    let mut features = vec![0f64; n * d];
    let mut unidentifiable: Vec<usize> = (0..n).filter(|&i| a[i * n + i] <= 0.0).collect();
    let mut rank_deficient = false;

    for comp in components.iter().filter(|c| !c.is_empty()) {
        if let [i] = comp[..] {
            let aii = a[i * n + i];
            for c in 0..d {
                features[i * d + c] = b[i * d + c] / aii;
            }
            continue;
        }
        let m = comp.len();
        let am = DMatrix::from_fn(m, m, |r, c| a[comp[r] * n + comp[c]]);
        let bm = DMatrix::from_fn(m, d, |r, c| b[comp[r] * d + c]);
        let eig = SymmetricEigen::new(am.clone());
        let lmax = eig.eigenvalues.amax();
        let cutoff = RANK_TOL * lmax;
        let null: Vec<usize> = (0..m).filter(|&j| eig.eigenvalues[j] <= cutoff).collect();

        let x = if null.is_empty() {
            match am.cholesky() {
                Some(ch) => ch.solve(&bm),
                None => pseudo_solve(&eig, &bm, cutoff),
            }
        } else {
            rank_deficient = true;
            for (r, &g) in comp.iter().enumerate() {
                if null.iter().any(|&j| eig.eigenvectors[(r, j)].abs() > 1e-6) {
                    unidentifiable.push(g);
                }
            }
            pseudo_solve(&eig, &bm, cutoff)
        };
        for (r, &g) in comp.iter().enumerate() {
            for c in 0..d {
                features[g * d + c] = x[(r, c)];
            }
        }
    }
    unidentifiable.sort_unstable();
    FeatureEstimate {
        dim: d,
        features,
        unidentifiable,
        rank_deficient,
    }
}

fn pseudo_solve(eig: &SymmetricEigen<f64, nalgebra::Dyn>, rhs: &DMatrix<f64>, cutoff: f64) -> DMatrix<f64> {
    let v = &eig.eigenvectors;
    let mut proj = v.transpose() * rhs;
    for (j, &l) in eig.eigenvalues.iter().enumerate() {
        let scale = if l > cutoff { 1.0 / l } else { 0.0 };
        proj.row_mut(j).scale_mut(scale);
    }
    v * proj
}

#[derive(Clone, Debug, PartialEq)]
pub struct GapReport {
    /// `|f_exact - f_closed| / max(|f_exact|, eps)` per Gaussian.
    pub errors: Vec<f64>,
    pub mean: f64,
    pub max: f64,
    pub p95: f64,
}

pub fn approximation_gap(exact: &[f64], closed: &[f64], dim: usize) -> Result<GapReport> {
    const EPS: f64 = 1e-12;
    if exact.len() != closed.len() || dim == 0 || !exact.len().is_multiple_of(dim) {
        return Err(Error::DimensionMismatch {
            expected: exact.len(),
            actual: closed.len(),
        });
    }
    let errors: Vec<f64> = exact
        .chunks(dim)
        .zip(closed.chunks(dim))
        .map(|(e, c)| {
            let diff = e.iter().zip(c).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            let norm = e.iter().map(|a| a * a).sum::<f64>().sqrt();
            diff / norm.max(EPS)
        })
        .collect();
    Ok(summarize(errors))
}

pub(crate) fn summarize(errors: Vec<f64>) -> GapReport {
    if errors.is_empty() {
        return GapReport {
            errors,
            mean: 0.0,
            max: 0.0,
            p95: 0.0,
        };
    }
    let mut sorted = errors.clone();
    sorted.sort_by(f64::total_cmp);
    let p95_idx = ((0.95 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len()) - 1;
    GapReport {
        mean: errors.iter().sum::<f64>() / errors.len() as f64,
        max: *sorted.last().unwrap(),
        p95: sorted[p95_idx],
        errors,
    }
}

/// Registry adapter: full ML solve over all influenced pixels.
pub struct ExactMl;

impl UpliftMethod for ExactMl {
    fn name(&self) -> &'static str {
        "exact-ml"
    }

    fn uplift(
        &self,
        scene: &GaussianScene,
        views: &[CameraView],
        maps: &[FeatureMap],
        cfg: &UpliftConfig,
    ) -> Result<UpliftOutcome> {
        let rec = collect_dense_weights(scene, views, maps, &cfg.raster)?;
        let est = exact_ml_solve(&rec);
        let mut weight_sum = vec![0f64; scene.len()];
        for obs in &rec.pixels {
            for &(k, w) in &obs.weights {
                weight_sum[k as usize] += w;
            }
        }
        let mut semantic = scene.clone();
        semantic.set_features(est.dim, est.features.iter().map(|&v| v as f32).collect())?;
        let keep: Vec<usize> = (0..scene.len())
            .filter(|&i| !cfg.filter || weight_sum[i] > 0.0)
            .collect();
        let mut index_map = vec![None; scene.len()];
        for (new, &old) in keep.iter().enumerate() {
            index_map[old] = Some(new);
        }
        let out = semantic.subset(&keep);
        Ok(UpliftOutcome {
            stats: UpliftStats {
                n_views: views.len(),
                n_input: scene.len(),
                n_output: out.len(),
                n_active: weight_sum.iter().filter(|&&w| w > 0.0).count(),
                render_passes: views.len(),
                samples: rec.pixels.iter().map(|o| o.weights.len()).sum(),
            },
            scene: out,
            index_map,
            weight_sum,
        })
    }
}

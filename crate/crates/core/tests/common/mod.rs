#![allow(dead_code)]

use nalgebra::{Quaternion, Vector3};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use featlift::sh;
use featlift::uplift::UpliftOutcome;
use featlift::{CameraView, Gaussian, GaussianScene};

pub fn rel_l2<A: Copy + Into<f64>, B: Copy + Into<f64>>(truth: &[A], est: &[B]) -> f64 {
    let diff: f64 = truth
        .iter()
        .zip(est)
        .map(|(&a, &b)| (a.into() - b.into()).powi(2))
        .sum();
    let norm: f64 = truth.iter().map(|&a| a.into().powi(2)).sum();
    (diff / norm.max(1e-300)).sqrt()
}

pub fn abs_l2(truth: &[f32], est: &[f32]) -> f64 {
    truth
        .iter()
        .zip(est)
        .map(|(&a, &b)| f64::from(a - b).powi(2))
        .sum::<f64>()
        .sqrt()
}

/// Per-Gaussian relative error of the Gaussians kept in `out`, indexed by
/// input Gaussian.
pub fn recovery_errors(truth: &GaussianScene, out: &UpliftOutcome) -> Vec<(usize, f64)> {
    out.index_map
        .iter()
        .enumerate()
        .filter_map(|(i, m)| m.map(|j| (i, rel_l2(truth.feature(i).unwrap(), out.scene.feature(j).unwrap()))))
        .collect()
}

pub fn mean(xs: impl IntoIterator<Item = f64>) -> f64 {
    let (s, n) = xs.into_iter().fold((0.0, 0usize), |(s, n), x| (s + x, n + 1));
    s / n as f64
}

/// Anisotropic, randomly rotated Gaussians with degree-1 SH in front of a
/// randomly placed camera.
pub fn random_scene(seed: u64, n: usize, width: usize, height: usize) -> (GaussianScene, CameraView) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gaussians = (0..n)
        .map(|_| {
            let pos = Vector3::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let scale = Vector3::new(
                rng.random_range(0.01..0.25),
                rng.random_range(0.01..0.25),
                rng.random_range(0.01..0.25),
            );
            let rot = Quaternion::new(
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
                rng.random_range(-1.0..1.0),
            );
            let sh_coeffs = (0..sh::coeff_count(1))
                .map(|k| {
                    let amp = if k == 0 { 1.5 } else { 0.3 };
                    [0; 3].map(|_| rng.random_range(-amp..amp) as f32)
                })
                .collect();
            Gaussian::new(pos, scale, rot, rng.random_range(0.05..0.999), sh_coeffs).unwrap()
        })
        .collect();
    let az: f64 = rng.random_range(0.0..std::f64::consts::TAU);
    let el: f64 = rng.random_range(-0.6..0.6);
    let r = rng.random_range(3.0..5.0);
    let eye = Vector3::new(r * el.cos() * az.cos(), r * el.sin(), r * el.cos() * az.sin());
    let focal = rng.random_range(0.6..1.2) * width as f64;
    let cam = CameraView::look_at(
        "random",
        width,
        height,
        focal,
        eye,
        Vector3::zeros(),
        Vector3::new(0.0, -1.0, 0.0),
    );
    (GaussianScene::new(gaussians).unwrap(), cam)
}

/// Copy of `scene` whose features are the colors seen from `cam`.
pub fn colors_as_features(scene: &GaussianScene, cam: &CameraView) -> GaussianScene {
    let center = cam.center();
    let feats: Vec<f32> = scene
        .gaussians
        .iter()
        .flat_map(|g| sh::eval_color(&g.sh, &(g.position - center).normalize()).map(|c| c as f32))
        .collect();
    let mut out = scene.clone();
    out.set_features(3, feats).unwrap();
    out
}

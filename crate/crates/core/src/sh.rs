//! Real spherical-harmonics color evaluation (degrees 0-3) in the basis and
//! coefficient ordering used by stock 3DGS checkpoints, plus band-wise
//! rotation of coefficient sets.

use nalgebra::{DMatrix, Rotation3, Vector3};

pub const SH_C0: f64 = 0.282_094_791_773_878_14;
pub const SH_C1: f64 = 0.488_602_511_902_919_9;
pub const SH_C2: [f64; 5] = [
    1.092_548_430_592_079_2,
    -1.092_548_430_592_079_2,
    0.315_391_565_252_520_05,
    -1.092_548_430_592_079_2,
    0.546_274_215_296_039_6,
];
pub const SH_C3: [f64; 7] = [
    -0.590_043_589_926_643_5,
    2.890_611_442_640_554,
    -0.457_045_799_464_465_8,
    0.373_176_332_590_115_4,
    -0.457_045_799_464_465_8,
    1.445_305_721_320_277,
    -0.590_043_589_926_643_5,
];

pub const MAX_DEGREE: u8 = 3;

pub fn coeff_count(degree: u8) -> usize {
    let d = degree as usize + 1;
    d * d
}

/// Inverse of [`coeff_count`]; `None` when `count` is not a perfect square of 1..=4.
pub fn degree_for_count(count: usize) -> Option<u8> {
    (0..=MAX_DEGREE).find(|&d| coeff_count(d) == count)
}

/// Basis values for a unit direction, `coeff_count(degree)` entries.
pub fn basis(degree: u8, dir: &Vector3<f64>) -> Vec<f64> {
    let mut out = Vec::with_capacity(coeff_count(degree));
    out.push(SH_C0);
    if degree == 0 {
        return out;
    }
    let (x, y, z) = (dir.x, dir.y, dir.z);
    out.extend([-SH_C1 * y, SH_C1 * z, -SH_C1 * x]);
    if degree == 1 {
        return out;
    }
    let (xx, yy, zz) = (x * x, y * y, z * z);
    let (xy, yz, xz) = (x * y, y * z, x * z);
    out.extend([
        SH_C2[0] * xy,
        SH_C2[1] * yz,
        SH_C2[2] * (2.0 * zz - xx - yy),
        SH_C2[3] * xz,
        SH_C2[4] * (xx - yy),
    ]);
    if degree == 2 {
        return out;
    }
    out.extend([
        SH_C3[0] * y * (3.0 * xx - yy),
        SH_C3[1] * xy * z,
        SH_C3[2] * y * (4.0 * zz - xx - yy),
        SH_C3[3] * z * (2.0 * zz - 3.0 * xx - 3.0 * yy),
        SH_C3[4] * x * (4.0 * zz - xx - yy),
        SH_C3[5] * z * (xx - yy),
        SH_C3[6] * x * (xx - 3.0 * yy),
    ]);
    out
}

/// RGB color seen from `dir` (unit vector from the camera center towards the
/// Gaussian). Negative channels are clamped to zero.
pub fn eval_color(sh: &[[f32; 3]], dir: &Vector3<f64>) -> [f64; 3] {
    let degree = degree_for_count(sh.len()).unwrap_or(0);
    let mut rgb = [0.5; 3];
    if degree == 0 {
        for (c, v) in rgb.iter_mut().enumerate() {
            *v += SH_C0 * sh[0][c] as f64;
        }
    } else {
        for (b, coeff) in basis(degree, dir).iter().zip(sh) {
            for c in 0..3 {
                rgb[c] += b * coeff[c] as f64;
            }
        }
    }
    rgb.map(|v| v.max(0.0))
}

/// DC coefficient that reproduces `rgb` under [`eval_color`].
pub fn dc_from_rgb(rgb: [f64; 3]) -> [f32; 3] {
    rgb.map(|v| ((v - 0.5) / SH_C0) as f32)
}

fn fibonacci_sphere(n: usize) -> Vec<Vector3<f64>> {
    let golden = std::f64::consts::PI * (3.0 - 5f64.sqrt());
    (0..n)
        .map(|i| {
            let y = 1.0 - 2.0 * (i as f64 + 0.5) / n as f64;
            let r = (1.0 - y * y).sqrt();
            let theta = golden * i as f64;
            Vector3::new(r * theta.cos(), y, r * theta.sin())
        })
        .collect()
}

/// Rotates SH coefficients so that the rotated lobe seen along `R d` matches the
/// original seen along `d`. Each band is an invariant subspace, so the per-band
/// matrix is recovered exactly by least squares over sample directions.
pub fn rotate_coefficients(sh: &[[f32; 3]], rotation: &Rotation3<f64>) -> Vec<[f32; 3]> {
    let degree = match degree_for_count(sh.len()) {
        Some(d) if d > 0 => d,
        _ => return sh.to_vec(),
    };
    let dirs = fibonacci_sphere(64);
    let inv = rotation.inverse();
    let fwd: Vec<Vec<f64>> = dirs.iter().map(|d| basis(degree, d)).collect();
    let back: Vec<Vec<f64>> = dirs.iter().map(|d| basis(degree, &(inv * d))).collect();

    let mut out = sh.to_vec();
    for band in 1..=degree as usize {
        let lo = band * band;
        let width = 2 * band + 1;
        let a = DMatrix::from_fn(dirs.len(), width, |r, c| fwd[r][lo + c]);
        let b = DMatrix::from_fn(dirs.len(), width, |r, c| back[r][lo + c]);
        let svd = a.svd(true, true);
        let d = svd.solve(&b, 1e-12).expect("svd computed with u and v");
        for c in 0..3 {
            for m in 0..width {
                let mut acc = 0.0;
                for k in 0..width {
                    acc += d[(m, k)] * sh[lo + k][c] as f64;
                }
                out[lo + m][c] = acc as f32;
            }
        }
    }
    out
}

//! CPU forward renderer for Gaussian scenes.
//!
//! A [`Frame`] projects every Gaussian into one camera, bins the 2D footprints
//! into 16x16 tiles and sorts each tile front to back. All per-pixel outputs
//! (color, features, center samples, dense weights) walk the same tile lists
//! through [`Frame::blend_pixel`], so they see identical blending weights.

mod bins;
mod frame;
mod project;

pub use bins::{bin_and_sort, TileBins, TILE_SIZE};
pub use frame::{collect_center_samples, render_color, render_features, CenterSample, ColorImage, Frame};
pub use project::{compute_alpha, project_gaussian, Projected2D, TRUNCATION_SIGMA};

/// Renderer constants. Defaults follow the reference 3DGS rasterizer.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RasterConfig {
    /// Upper clamp on per-Gaussian alpha.
    pub alpha_max: f64,
    /// Contributions with alpha below this are skipped.
    pub alpha_min: f64,
    /// Blending stops once transmittance falls below this.
    pub transmittance_min: f64,
    /// Added to the diagonal of every projected covariance (px^2).
    pub low_pass: f64,
    /// Camera-frame depth below which Gaussians are culled.
    pub near: f64,
    /// Projected centers further than this fraction of the image size outside
    /// the image are culled.
    pub frustum_pad: f64,
    /// Feature rendering drops contributions whose blending weight is below
    /// this value (transmittance still decays).
    pub feature_min_weight: f64,
}

impl Default for RasterConfig {
    fn default() -> Self {
        RasterConfig {
            alpha_max: 0.99,
            alpha_min: 1.0 / 255.0,
            transmittance_min: 1e-4,
            low_pass: 0.3,
            near: 0.01,
            frustum_pad: 0.3,
            feature_min_weight: 0.0,
        }
    }
}

impl RasterConfig {
    /// Removes the alpha clamp so that opacities close to one produce
    /// near-binary blending weights. Used for exactness checks of the
    /// closed-form aggregation, which is exact only for binary weights.
    pub fn unclamped() -> Self {
        RasterConfig {
            alpha_max: 1.0,
            ..Self::default()
        }
    }
}

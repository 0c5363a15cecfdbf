//! Uplifting of multi-view 2D feature maps onto 3D Gaussian splatting scenes
//! by blending-weighted aggregation, with a CPU rasterizer, an exact
//! least-squares reference solver, open-vocabulary querying and editing.

pub mod bench;
pub mod camera;
pub mod edit;
pub mod error;
pub mod feature_map;
pub mod io;
pub mod oracle;
pub mod query;
pub mod raster;
pub mod registry;
pub mod scene;
pub mod sh;
pub mod synth;
pub mod uplift;

pub use camera::CameraView;
pub use error::{Error, Result};
pub use feature_map::FeatureMap;
pub use scene::{Gaussian, GaussianScene};

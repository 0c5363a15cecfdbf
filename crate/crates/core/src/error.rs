use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid rotation: quaternion has zero norm")]
    InvalidRotation,

    #[error("invalid gaussian {index}: {reason}")]
    InvalidGaussian { index: usize, reason: String },

    #[error("invalid camera '{id}': {reason}")]
    InvalidCamera { id: String, reason: String },

    #[error("scene is empty")]
    EmptyScene,

    #[error("scene has no semantic features")]
    MissingFeatures,

    #[error("feature dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("feature map {map_width}x{map_height} does not match view aspect {view_width}x{view_height}")]
    MapMismatch {
        map_width: usize,
        map_height: usize,
        view_width: usize,
        view_height: usize,
    },

    #[error("got {views} views but {maps} feature maps")]
    ViewMapCount { views: usize, maps: usize },

    #[error("scale guard exceeded: {0}")]
    ScaleGuard(String),

    #[error("infeasible synthetic layout: {0}")]
    InfeasibleLayout(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("unknown {kind} '{name}' (available: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("{path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("cannot access {path}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("cannot decode image {path}")]
    Image {
        path: PathBuf,
        #[source]
        source: image::ImageError,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }

    /// True for errors caused by inputs that are individually valid but
    /// disagree with each other (view/map counts, feature dimensions, map sizes).
    pub fn is_consistency(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. } | Error::MapMismatch { .. } | Error::ViewMapCount { .. }
        )
    }
}

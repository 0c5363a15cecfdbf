//! Camera files: a JSON array of records
//! `{id, width, height, fx, fy, cx, cy, rotation, translation}` where
//! `rotation` is the 3x3 world-to-camera matrix as rows and `translation`
//! the world-to-camera translation.

use std::fs;
use std::path::Path;

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};

use crate::camera::CameraView;
use crate::error::{Error, Result};

/// Largest `|R^T R - I|` entry accepted from a camera file.
pub const FILE_ORTHONORMAL_TOL: f64 = 1e-3;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CameraRecord {
    pub id: String,
    pub width: usize,
    pub height: usize,
    pub fx: f64,
    pub fy: f64,
    pub cx: f64,
    pub cy: f64,
    pub rotation: [[f64; 3]; 3],
    pub translation: [f64; 3],
}

impl From<&CameraView> for CameraRecord {
    fn from(c: &CameraView) -> Self {
        let r = &c.rotation;
        CameraRecord {
            id: c.id.clone(),
            width: c.width,
            height: c.height,
            fx: c.fx,
            fy: c.fy,
            cx: c.cx,
            cy: c.cy,
            rotation: [0, 1, 2].map(|i| [r[(i, 0)], r[(i, 1)], r[(i, 2)]]),
            translation: [c.translation.x, c.translation.y, c.translation.z],
        }
    }
}

impl From<CameraRecord> for CameraView {
    fn from(r: CameraRecord) -> Self {
        CameraView {
            id: r.id,
            width: r.width,
            height: r.height,
            fx: r.fx,
            fy: r.fy,
            cx: r.cx,
            cy: r.cy,
            rotation: Matrix3::from_fn(|i, j| r.rotation[i][j]),
            translation: Vector3::from(r.translation),
        }
    }
}

pub fn parse_cameras(text: &str, path: &Path) -> Result<Vec<CameraView>> {
    let records: Vec<CameraRecord> = serde_json::from_str(text).map_err(|e| Error::format(path, e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    let views: Vec<CameraView> = records.into_iter().map(CameraView::from).collect();
    for v in &views {
        v.validate(FILE_ORTHONORMAL_TOL)
            .map_err(|e| Error::format(path, e.to_string()))?;
        if !seen.insert(v.id.as_str()) {
            return Err(Error::format(path, format!("duplicate camera id '{}'", v.id)));
        }
    }
    Ok(views)
}

pub fn read_cameras(path: impl AsRef<Path>) -> Result<Vec<CameraView>> {
    let path = path.as_ref();
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    parse_cameras(&text, path)
}

pub fn write_cameras(views: &[CameraView], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let records: Vec<CameraRecord> = views.iter().map(CameraRecord::from).collect();
    let text = serde_json::to_string_pretty(&records).expect("camera records serialize");
    fs::write(path, text + "\n").map_err(|e| Error::io(path, e))
}

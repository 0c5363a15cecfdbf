//! File formats: PLY checkpoints, feature-map binaries, camera files, PNG.

mod cameras;
mod fmap;
mod ply;
mod png;

use std::path::{Path, PathBuf};

pub use cameras::{parse_cameras, read_cameras, write_cameras, CameraRecord, FILE_ORTHONORMAL_TOL};
pub use fmap::{
    decode_feature_map, encode_feature_map, read_feature_map, write_feature_map, HEADER_LEN as FMAP_HEADER_LEN,
};
pub use ply::{encode_ply, parse_ply, ply_size, property_names, read_ply, read_ply_report, write_ply, PlyRead};
pub use png::{feature_preview, read_mask_png, write_gray_png, write_mask_png, write_rgb_png};

use crate::uplift::Level;

/// `<dir>/<view_id>_<level>.fmap`
pub fn level_map_path(dir: &Path, view_id: &str, level: Level) -> PathBuf {
    dir.join(format!("{view_id}_{level}.fmap"))
}

/// `<dir>/<view_id>.fmap`, used when features have a single level.
pub fn map_path(dir: &Path, view_id: &str) -> PathBuf {
    dir.join(format!("{view_id}.fmap"))
}

/// `out.ply` becomes `out_<level>.ply`.
pub fn level_scene_path(out: &Path, level: Level) -> PathBuf {
    let stem = out
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scene".into());
    out.with_file_name(format!("{stem}_{level}.ply"))
}

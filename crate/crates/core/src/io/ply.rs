//! Binary little-endian PLY checkpoints in the common 3DGS layout, extended
//! with `f_sem_*` properties for semantic features.

use std::fs;
use std::path::Path;

use log::warn;
use nalgebra::{Quaternion, Vector3};

use crate::error::{Error, Result};
use crate::scene::{logit_from_opacity, opacity_from_logit, Gaussian, GaussianScene};
use crate::sh;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
enum Scalar {
    I8,
    U8,
    I16,
    U16,
    I32,
    U32,
    F32,
    F64,
}

impl Scalar {
    fn parse(name: &str) -> Option<Scalar> {
        Some(match name {
            "char" | "int8" => Scalar::I8,
            "uchar" | "uint8" => Scalar::U8,
            "short" | "int16" => Scalar::I16,
            "ushort" | "uint16" => Scalar::U16,
            "int" | "int32" => Scalar::I32,
            "uint" | "uint32" => Scalar::U32,
            "float" | "float32" => Scalar::F32,
            "double" | "float64" => Scalar::F64,
            _ => return None,
        })
    }

    fn size(self) -> usize {
        match self {
            Scalar::I8 | Scalar::U8 => 1,
            Scalar::I16 | Scalar::U16 => 2,
            Scalar::I32 | Scalar::U32 | Scalar::F32 => 4,
            Scalar::F64 => 8,
        }
    }

    fn read(self, b: &[u8]) -> f64 {
        match self {
            Scalar::I8 => b[0] as i8 as f64,
            Scalar::U8 => b[0] as f64,
            Scalar::I16 => i16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::U16 => u16::from_le_bytes([b[0], b[1]]) as f64,
            Scalar::I32 => i32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::U32 => u32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F32 => f32::from_le_bytes(b[..4].try_into().unwrap()) as f64,
            Scalar::F64 => f64::from_le_bytes(b[..8].try_into().unwrap()),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
struct Header {
    vertex_count: usize,
    /// `(name, type, byte offset within a row)`
    properties: Vec<(String, Scalar, usize)>,
    row_size: usize,
    body_offset: usize,
}

fn parse_header(bytes: &[u8], path: &Path) -> Result<Header> {
    let bad = |m: String| Error::format(path, m);
    const END: &[u8] = b"end_header\n";
    let end = bytes
        .windows(END.len())
        .position(|w| w == END)
        .ok_or_else(|| bad("missing end_header".into()))?;
    let text = std::str::from_utf8(&bytes[..end]).map_err(|_| bad("header is not UTF-8".into()))?;
    let mut lines = text.lines();
    if lines.next().map(str::trim) != Some("ply") {
        return Err(bad("missing 'ply' magic".into()));
    }

    let mut format_ok = false;
    let mut vertex_count = None;
    let mut in_vertex = false;
    let mut seen_vertex = false;
    let mut properties = Vec::new();
    let mut row_size = 0;
    for line in lines {
        let tok: Vec<&str> = line.split_whitespace().collect();
        match tok.as_slice() {
            [] | ["comment", ..] | ["obj_info", ..] => {}
            ["format", "binary_little_endian", "1.0"] => format_ok = true,
            ["format", other, ..] => return Err(bad(format!("unsupported format '{other}'"))),
            ["element", "vertex", n] => {
                if seen_vertex {
                    return Err(bad("duplicate vertex element".into()));
                }
                vertex_count = Some(n.parse::<usize>().map_err(|_| bad(format!("bad vertex count '{n}'")))?);
                in_vertex = true;
                seen_vertex = true;
            }
            ["element", name, ..] => {
                if !seen_vertex {
                    return Err(bad(format!("element '{name}' before vertex is not supported")));
                }
                in_vertex = false;
            }
            ["property", "list", ..] if in_vertex => return Err(bad("list properties are not supported".into())),
            ["property", ty, name] if in_vertex => {
                let s = Scalar::parse(ty).ok_or_else(|| bad(format!("unknown property type '{ty}'")))?;
                properties.push((name.to_string(), s, row_size));
                row_size += s.size();
            }
            ["property", ..] => {}
            _ => return Err(bad(format!("malformed header line '{line}'"))),
        }
    }
    if !format_ok {
        return Err(bad("missing 'format binary_little_endian 1.0'".into()));
    }
    Ok(Header {
        vertex_count: vertex_count.ok_or_else(|| bad("missing vertex element".into()))?,
        properties,
        row_size,
        body_offset: end + END.len(),
    })
}

/// Result of reading a checkpoint.
#[derive(Clone, Debug, PartialEq)]
pub struct PlyRead {
    pub scene: GaussianScene,
    /// Rows dropped because a parameter was NaN or infinite.
    pub rejected_rows: usize,
}

fn column(h: &Header, name: &str) -> Option<(Scalar, usize)> {
    h.properties.iter().find(|p| p.0 == name).map(|p| (p.1, p.2))
}

/// Columns named `prefix0, prefix1, ...` up to the first gap.
fn indexed_columns(h: &Header, prefix: &str) -> Vec<(Scalar, usize)> {
    (0..).map_while(|i| column(h, &format!("{prefix}{i}"))).collect()
}

pub fn parse_ply(bytes: &[u8], path: &Path) -> Result<PlyRead> {
    let h = parse_header(bytes, path)?;
    let required =
        |name: &str| column(&h, name).ok_or_else(|| Error::format(path, format!("missing required property '{name}'")));
    let pos = ["x", "y", "z"].map(required);
    let dc = ["f_dc_0", "f_dc_1", "f_dc_2"].map(required);
    let opacity = required("opacity")?;
    let scale = ["scale_0", "scale_1", "scale_2"].map(required);
    let rot = ["rot_0", "rot_1", "rot_2", "rot_3"].map(required);
    let [pos, dc, scale] = [pos, dc, scale].map(|a| a.into_iter().collect::<Result<Vec<_>>>());
    let (pos, dc, scale) = (pos?, dc?, scale?);
    let rot = rot.into_iter().collect::<Result<Vec<_>>>()?;
    let rest = indexed_columns(&h, "f_rest_");
    let sem = indexed_columns(&h, "f_sem_");

    if !rest.len().is_multiple_of(3) {
        return Err(Error::format(
            path,
            format!("{} f_rest properties is not a multiple of 3", rest.len()),
        ));
    }
    let n_coeffs = 1 + rest.len() / 3;
    if sh::degree_for_count(n_coeffs).is_none() {
        return Err(Error::format(
            path,
            format!("{n_coeffs} SH coefficients do not match any degree up to 3"),
        ));
    }

    let body = &bytes[h.body_offset..];
    let needed = h
        .vertex_count
        .checked_mul(h.row_size)
        .ok_or_else(|| Error::format(path, "vertex count overflows"))?;
    if body.len() < needed {
        return Err(Error::format(
            path,
            format!(
                "truncated body: {} vertices need {needed} bytes, found {}",
                h.vertex_count,
                body.len()
            ),
        ));
    }

    let mut gaussians = Vec::with_capacity(h.vertex_count);
    let mut features = Vec::with_capacity(h.vertex_count * sem.len());
    let mut rejected = 0;
    for (row_index, row) in body[..needed]
        .chunks_exact(h.row_size.max(1))
        .take(h.vertex_count)
        .enumerate()
    {
        let get = |(s, off): (Scalar, usize)| s.read(&row[off..]);
        let all = h.properties.iter().map(|p| get((p.1, p.2)));
        if all.clone().any(|v| !v.is_finite()) {
            rejected += 1;
            continue;
        }
        let mut coeffs = vec![[0f32; 3]; n_coeffs];
        for c in 0..3 {
            coeffs[0][c] = get(dc[c]) as f32;
            for j in 1..n_coeffs {
                coeffs[j][c] = get(rest[c * (n_coeffs - 1) + j - 1]) as f32;
            }
        }
        let g = Gaussian::new(
            Vector3::new(get(pos[0]), get(pos[1]), get(pos[2])),
            Vector3::new(get(scale[0]).exp(), get(scale[1]).exp(), get(scale[2]).exp()),
            Quaternion::new(get(rot[0]), get(rot[1]), get(rot[2]), get(rot[3])),
            opacity_from_logit(get(opacity)),
            coeffs,
        )
        .map_err(|e| Error::format(path, format!("vertex {row_index}: {e}")))?;
        gaussians.push(g);
        features.extend(sem.iter().map(|&c| get(c) as f32));
    }
    if rejected > 0 {
        warn!(
            "{}: rejected {rejected} rows with non-finite parameters",
            path.display()
        );
    }
    Ok(PlyRead {
        scene: GaussianScene::with_features(gaussians, sem.len(), features)?,
        rejected_rows: rejected,
    })
}

pub fn read_ply_report(path: impl AsRef<Path>) -> Result<PlyRead> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_ply(&bytes, path)
}

pub fn read_ply(path: impl AsRef<Path>) -> Result<GaussianScene> {
    Ok(read_ply_report(path)?.scene)
}

/// Property names in file order for a scene of the given SH degree and
/// feature dimension.
pub fn property_names(sh_degree: u8, feature_dim: usize) -> Vec<String> {
    let rest = 3 * (sh::coeff_count(sh_degree) - 1);
    let mut names: Vec<String> = ["x", "y", "z", "f_dc_0", "f_dc_1", "f_dc_2"].map(String::from).to_vec();
    names.extend((0..rest).map(|i| format!("f_rest_{i}")));
    names.push("opacity".into());
    names.extend((0..3).map(|i| format!("scale_{i}")));
    names.extend((0..4).map(|i| format!("rot_{i}")));
    names.extend((0..feature_dim).map(|i| format!("f_sem_{i}")));
    names
}

fn header_text(n: usize, sh_degree: u8, feature_dim: usize) -> String {
    let mut s = format!("ply\nformat binary_little_endian 1.0\nelement vertex {n}\n");
    for name in property_names(sh_degree, feature_dim) {
        s.push_str(&format!("property float {name}\n"));
    }
    s.push_str("end_header\n");
    s
}

/// Exact file size `write_ply` produces.
pub fn ply_size(n: usize, sh_degree: u8, feature_dim: usize) -> usize {
    header_text(n, sh_degree, feature_dim).len() + n * property_names(sh_degree, feature_dim).len() * 4
}

pub fn encode_ply(scene: &GaussianScene) -> Vec<u8> {
    let degree = scene.sh_degree();
    let k = sh::coeff_count(degree);
    let d = scene.feature_dim();
    let mut out = header_text(scene.len(), degree, d).into_bytes();
    out.reserve(scene.len() * property_names(degree, d).len() * 4);
    let mut put = |v: f64| out.extend_from_slice(&(v as f32).to_le_bytes());
    for (i, g) in scene.gaussians.iter().enumerate() {
        g.position.iter().for_each(|&v| put(v));
        (0..3).for_each(|c| put(g.sh[0][c] as f64));
        for c in 0..3 {
            for j in 1..k {
                put(g.sh[j][c] as f64);
            }
        }
        put(logit_from_opacity(g.opacity));
        g.scale.iter().for_each(|&s| put(s.ln()));
        let q = g.rotation.quaternion();
        [q.w, q.i, q.j, q.k].into_iter().for_each(&mut put);
        if let Some(f) = scene.feature(i) {
            f.iter().for_each(|&v| put(v as f64));
        }
    }
    out
}

pub fn write_ply(scene: &GaussianScene, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_ply(scene)).map_err(|e| Error::io(path, e))
}

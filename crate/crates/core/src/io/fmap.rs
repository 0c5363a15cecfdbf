//! Feature-map binaries: 8-byte magic `OLGSFMAP`, then little-endian u32
//! `version, height, width, dim, dtype`, then the row-major `H x W x dim`
//! f32 payload.

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;

pub const MAGIC: &[u8; 8] = b"OLGSFMAP";
pub const VERSION: u32 = 1;
pub const DTYPE_F32: u32 = 1;
pub const HEADER_LEN: usize = 28;

pub fn encode_feature_map(map: &FeatureMap) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + map.data().len() * 4);
    out.extend_from_slice(MAGIC);
    for v in [
        VERSION,
        map.height() as u32,
        map.width() as u32,
        map.dim() as u32,
        DTYPE_F32,
    ] {
        out.extend_from_slice(&v.to_le_bytes());
    }
    for v in map.data() {
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn decode_feature_map(bytes: &[u8], path: &Path) -> Result<FeatureMap> {
    let bad = |m: String| Error::format(path, m);
    if bytes.len() < HEADER_LEN {
        return Err(bad(format!(
            "file is {} bytes, shorter than the {HEADER_LEN}-byte header",
            bytes.len()
        )));
    }
    if &bytes[..8] != MAGIC {
        return Err(bad("bad magic; not a feature map file".into()));
    }
    let word = |i: usize| u32::from_le_bytes(bytes[8 + 4 * i..12 + 4 * i].try_into().unwrap());
    let (version, h, w, d, dtype) = (word(0), word(1), word(2), word(3), word(4));
    if version != VERSION {
        return Err(bad(format!("unsupported version {version}")));
    }
    if dtype != DTYPE_F32 {
        return Err(bad(format!("unsupported dtype tag {dtype}")));
    }
    let payload = (h as usize)
        .checked_mul(w as usize)
        .and_then(|n| n.checked_mul(d as usize))
        .and_then(|n| n.checked_mul(4))
        .ok_or_else(|| bad("dimensions overflow".into()))?;
    let body = &bytes[HEADER_LEN..];
    if body.len() != payload {
        return Err(bad(format!(
            "payload is {} bytes, expected {payload} for {h}x{w}x{d}",
            body.len()
        )));
    }
    let data = body
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    FeatureMap::new(w as usize, h as usize, d as usize, data)
}

pub fn write_feature_map(map: &FeatureMap, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_feature_map(map)).map_err(|e| Error::io(path, e))
}

pub fn read_feature_map(path: impl AsRef<Path>) -> Result<FeatureMap> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_map(&bytes, path)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    #[test]
    fn random_map_round_trip_is_bit_identical() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let data: Vec<f32> = (0..32 * 32 * 8).map(|_| rng.random_range(-5.0..5.0)).collect();
        let map = FeatureMap::new(32, 32, 8, data).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.fmap");
        write_feature_map(&map, &p).unwrap();
        let back = read_feature_map(&p).unwrap();
        assert_eq!(
            back.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>(),
            map.data().iter().map(|v| v.to_bits()).collect::<Vec<_>>()
        );
        assert_eq!((back.width(), back.height(), back.dim()), (32, 32, 8));
    }

    #[test]
    fn header_layout() {
        let map = FeatureMap::new(3, 2, 1, vec![0.0, 1.0, 2.0, 3.0, 4.0, 5.0]).unwrap();
        let b = encode_feature_map(&map);
        assert_eq!(b.len(), 28 + 24);
        assert_eq!(&b[..8], b"OLGSFMAP");
        assert_eq!(&b[8..28], &[1, 0, 0, 0, 2, 0, 0, 0, 3, 0, 0, 0, 1, 0, 0, 0, 1, 0, 0, 0]);
        assert_eq!(&b[28 + 4..32 + 4], &1f32.to_le_bytes());
    }

    #[test]
    fn rejects_bad_files() {
        let p = Path::new("x.fmap");
        let good = encode_feature_map(&FeatureMap::zeros(2, 2, 2));
        let mut magic = good.clone();
        magic[0] = b'X';
        assert!(decode_feature_map(&magic, p).is_err());
        let mut version = good.clone();
        version[8] = 2;
        assert!(decode_feature_map(&version, p).is_err());
        let mut dtype = good.clone();
        dtype[24] = 7;
        assert!(decode_feature_map(&dtype, p).is_err());
        let mut extra = good.clone();
        extra.push(0);
        assert!(decode_feature_map(&extra, p).is_err());
        let err = read_feature_map("/nonexistent/dir/x.fmap").unwrap_err().to_string();
        assert!(err.contains("/nonexistent/dir/x.fmap"), "{err}");
    }

    proptest! {
        #[test]
        fn truncation_is_an_error(cut in 0usize..60) {
            let good = encode_feature_map(&FeatureMap::zeros(2, 3, 2));
            prop_assume!(cut < good.len());
            prop_assert!(decode_feature_map(&good[..cut], Path::new("t")).is_err());
        }
    }
}

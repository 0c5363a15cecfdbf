//! 8-bit PNG output for relevancy maps, masks and renders; mask input.

use std::path::Path;

use image::{GrayImage, Luma, Rgb, RgbImage};

use crate::error::{Error, Result};
use crate::feature_map::FeatureMap;
use crate::query::Mask;
use crate::raster::ColorImage;

fn to_u8(v: f64) -> u8 {
    (v.clamp(0.0, 1.0) * 255.0).round() as u8
}

/// Grayscale PNG of row-major values clamped to `[0, 1]`.
pub fn write_gray_png(values: &[f64], width: usize, height: usize, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    if values.len() != width * height {
        return Err(Error::DimensionMismatch {
            expected: width * height,
            actual: values.len(),
        });
    }
    let img = GrayImage::from_fn(width as u32, height as u32, |x, y| {
        Luma([to_u8(values[y as usize * width + x as usize])])
    });
    img.save(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

pub fn write_rgb_png(img: &ColorImage, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let out = RgbImage::from_fn(img.width as u32, img.height as u32, |x, y| {
        let c = img.rgb[y as usize * img.width + x as usize];
        Rgb(c.map(|v| to_u8(v as f64)))
    });
    out.save(path).map_err(|e| Error::Image {
        path: path.into(),
        source: e,
    })
}

pub fn write_mask_png(mask: &Mask, path: impl AsRef<Path>) -> Result<()> {
    let v: Vec<f64> = mask.bits.iter().map(|&b| if b { 1.0 } else { 0.0 }).collect();
    write_gray_png(&v, mask.width, mask.height, path)
}

/// Pixels brighter than mid-gray are set.
pub fn read_mask_png(path: impl AsRef<Path>) -> Result<Mask> {
    let path = path.as_ref();
    let img = image::open(path)
        .map_err(|e| Error::Image {
            path: path.into(),
            source: e,
        })?
        .to_luma8();
    let (w, h) = (img.width() as usize, img.height() as usize);
    Mask::new(w, h, img.pixels().map(|p| p.0[0] > 127).collect())
}

/// RGB preview of the first three feature channels, min-max normalized over
/// the whole map. Maps with fewer channels repeat the last one.
pub fn feature_preview(map: &FeatureMap) -> ColorImage {
    let d = map.dim();
    let ch = [0, 1.min(d - 1), 2.min(d - 1)];
    let (mut lo, mut hi) = (f32::INFINITY, f32::NEG_INFINITY);
    for px in map.data().chunks(d) {
        for &c in &ch {
            lo = lo.min(px[c]);
            hi = hi.max(px[c]);
        }
    }
    let span = if hi > lo { hi - lo } else { 1.0 };
    let rgb = map.data().chunks(d).map(|px| ch.map(|c| (px[c] - lo) / span)).collect();
    ColorImage {
        width: map.width(),
        height: map.height(),
        rgb,
        alpha: vec![1.0; map.width() * map.height()],
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mask_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("m.png");
        let m = Mask::from_fn(13, 7, |x, y| (x * y) % 3 == 0);
        write_mask_png(&m, &p).unwrap();
        assert_eq!(read_mask_png(&p).unwrap(), m);
    }

    #[test]
    fn gray_values_are_clamped_and_scaled() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("g.png");
        write_gray_png(&[-1.0, 0.0, 0.5, 2.0], 4, 1, &p).unwrap();
        let img = image::open(&p).unwrap().to_luma8();
        assert_eq!(img.pixels().map(|p| p.0[0]).collect::<Vec<_>>(), vec![0, 0, 128, 255]);
        assert!(write_gray_png(&[0.0; 3], 2, 2, &p).is_err());
    }

    #[test]
    fn rgb_and_preview() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("c.png");
        let map = FeatureMap::new(2, 1, 1, vec![-1.0, 3.0]).unwrap();
        let prev = feature_preview(&map);
        assert_eq!(prev.rgb, vec![[0.0; 3], [1.0; 3]]);
        write_rgb_png(&prev, &p).unwrap();
        let img = image::open(&p).unwrap().to_rgb8();
        assert_eq!(img.get_pixel(1, 0).0, [255, 255, 255]);
        assert!(read_mask_png(dir.path().join("missing.png")).is_err());
    }
}

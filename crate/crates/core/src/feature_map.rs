use crate::error::{Error, Result};

/// Dense `height x width x dim` row-major feature image.
#[derive(Clone, Debug, PartialEq)]
pub struct FeatureMap {
    width: usize,
    height: usize,
    dim: usize,
    data: Vec<f32>,
}

impl FeatureMap {
    pub fn new(width: usize, height: usize, dim: usize, data: Vec<f32>) -> Result<Self> {
        if data.len() != width * height * dim {
            return Err(Error::DimensionMismatch {
                expected: width * height * dim,
                actual: data.len(),
            });
        }
        Ok(FeatureMap {
            width,
            height,
            dim,
            data,
        })
    }

    pub fn zeros(width: usize, height: usize, dim: usize) -> Self {
        FeatureMap {
            width,
            height,
            dim,
            data: vec![0.0; width * height * dim],
        }
    }

    /// Every pixel set to `value`.
    pub fn constant(width: usize, height: usize, value: &[f32]) -> Self {
        let data = value
            .iter()
            .copied()
            .cycle()
            .take(width * height * value.len())
            .collect();
        FeatureMap {
            width,
            height,
            dim: value.len(),
            data,
        }
    }

    pub fn width(&self) -> usize {
        self.width
    }

    pub fn height(&self) -> usize {
        self.height
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn data(&self) -> &[f32] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f32] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<f32> {
        self.data
    }

    pub fn pixel(&self, x: usize, y: usize) -> &[f32] {
        let at = (y * self.width + x) * self.dim;
        &self.data[at..at + self.dim]
    }

    pub fn pixel_mut(&mut self, x: usize, y: usize) -> &mut [f32] {
        let at = (y * self.width + x) * self.dim;
        &mut self.data[at..at + self.dim]
    }

    /// Fails when the map's aspect ratio differs from `view_width / view_height`
    /// by more than 1%.
    pub fn check_aspect(&self, view_width: usize, view_height: usize) -> Result<()> {
        let map_aspect = self.width as f64 / self.height as f64;
        let view_aspect = view_width as f64 / view_height as f64;
        if self.width == 0 || self.height == 0 || ((map_aspect - view_aspect) / view_aspect).abs() > 0.01 {
            return Err(Error::MapMismatch {
                map_width: self.width,
                map_height: self.height,
                view_width,
                view_height,
            });
        }
        Ok(())
    }

    /// Nearest-neighbor lookup of a render-resolution pixel in this map.
    pub fn sample(&self, x: usize, y: usize, view_width: usize, view_height: usize) -> &[f32] {
        if self.width == view_width && self.height == view_height {
            return self.pixel(x, y);
        }
        let sx = ((x as f64 + 0.5) * self.width as f64 / view_width as f64) as usize;
        let sy = ((y as f64 + 0.5) * self.height as f64 / view_height as f64) as usize;
        self.pixel(sx.min(self.width - 1), sy.min(self.height - 1))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn nearest_sampling_scales_coordinates() {
        let mut m = FeatureMap::zeros(4, 2, 1);
        for y in 0..2 {
            for x in 0..4 {
                m.pixel_mut(x, y)[0] = (y * 4 + x) as f32;
            }
        }
        assert_eq!(m.sample(0, 0, 8, 4), &[0.0]);
        assert_eq!(m.sample(7, 3, 8, 4), &[7.0]);
        assert_eq!(m.sample(3, 1, 8, 4), &[1.0]);
        assert_eq!(m.sample(2, 1, 4, 2), &[6.0]);
    }

    #[test]
    fn aspect_guard() {
        let m = FeatureMap::zeros(64, 48, 1);
        assert!(m.check_aspect(128, 96).is_ok());
        assert!(m.check_aspect(128, 128).is_err());
        assert!(FeatureMap::new(2, 2, 3, vec![0.0; 11]).is_err());
    }
}

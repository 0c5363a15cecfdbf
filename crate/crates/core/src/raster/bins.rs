use super::Projected2D;

pub const TILE_SIZE: usize = 16;

/// Per-tile candidate lists in compressed-row form. Entries index into the
/// `projected` slice given to [`bin_and_sort`] and are ordered front to back.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct TileBins {
    pub tiles_x: usize,
    pub tiles_y: usize,
    offsets: Vec<usize>,
    entries: Vec<u32>,
}

impl TileBins {
    pub fn tile(&self, tx: usize, ty: usize) -> &[u32] {
        let t = ty * self.tiles_x + tx;
        &self.entries[self.offsets[t]..self.offsets[t + 1]]
    }

    pub fn tile_for_pixel(&self, x: usize, y: usize) -> &[u32] {
        self.tile(x / TILE_SIZE, y / TILE_SIZE)
    }

    pub fn total_entries(&self) -> usize {
        self.entries.len()
    }
}

/// Inclusive pixel range covered by the 3-sigma box, clipped to the image.
pub(crate) fn pixel_bounds(p: &Projected2D, width: usize, height: usize) -> Option<[usize; 4]> {
    let x0 = (p.mean2d.x - p.extent[0]).ceil().max(0.0);
    let x1 = (p.mean2d.x + p.extent[0]).floor().min(width as f64 - 1.0);
    let y0 = (p.mean2d.y - p.extent[1]).ceil().max(0.0);
    let y1 = (p.mean2d.y + p.extent[1]).floor().min(height as f64 - 1.0);
    if x0 > x1 || y0 > y1 {
        return None;
    }
    Some([x0 as usize, x1 as usize, y0 as usize, y1 as usize])
}

/// Assigns every footprint to each tile its 3-sigma box overlaps; lists are
/// sorted by ascending depth with ties broken by Gaussian index.
pub fn bin_and_sort(projected: &[Projected2D], width: usize, height: usize) -> TileBins {
    let tiles_x = width.div_ceil(TILE_SIZE);
    let tiles_y = height.div_ceil(TILE_SIZE);
    let n_tiles = tiles_x * tiles_y;

    let mut order: Vec<u32> = (0..projected.len() as u32).collect();
    order.sort_unstable_by(|&a, &b| {
        let (pa, pb) = (&projected[a as usize], &projected[b as usize]);
        pa.depth
            .total_cmp(&pb.depth)
            .then(pa.gaussian_index.cmp(&pb.gaussian_index))
    });

    let ranges: Vec<Option<[usize; 4]>> = order
        .iter()
        .map(|&i| {
            pixel_bounds(&projected[i as usize], width, height)
                .map(|[x0, x1, y0, y1]| [x0 / TILE_SIZE, x1 / TILE_SIZE, y0 / TILE_SIZE, y1 / TILE_SIZE])
        })
        .collect();

    let mut counts = vec![0usize; n_tiles + 1];
    for [tx0, tx1, ty0, ty1] in ranges.iter().flatten() {
        for ty in *ty0..=*ty1 {
            for tx in *tx0..=*tx1 {
                counts[ty * tiles_x + tx + 1] += 1;
            }
        }
    }
    for t in 0..n_tiles {
        counts[t + 1] += counts[t];
    }
    let offsets = counts;
    let mut cursor = offsets.clone();
    let mut entries = vec![0u32; offsets[n_tiles]];
    for (&i, range) in order.iter().zip(&ranges) {
        if let Some([tx0, tx1, ty0, ty1]) = range {
            for ty in *ty0..=*ty1 {
                for tx in *tx0..=*tx1 {
                    let t = ty * tiles_x + tx;
                    entries[cursor[t]] = i;
                    cursor[t] += 1;
                }
            }
        }
    }

    TileBins {
        tiles_x,
        tiles_y,
        offsets,
        entries,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::{Matrix2, Vector2};
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn footprint(i: usize, x: f64, y: f64, sigma: f64, depth: f64) -> Projected2D {
        Projected2D::new(i, Vector2::new(x, y), Matrix2::identity() * sigma * sigma, depth, 0.5)
    }

    #[test]
    fn covering_footprint_lands_in_every_tile() {
        let bins = bin_and_sort(&[footprint(0, 32.0, 24.0, 40.0, 1.0)], 64, 48);
        for ty in 0..bins.tiles_y {
            for tx in 0..bins.tiles_x {
                assert_eq!(bins.tile(tx, ty), &[0]);
            }
        }
    }

    #[test]
    fn depth_order_with_index_ties() {
        let ps = [
            footprint(0, 8.0, 8.0, 1.0, 2.0),
            footprint(1, 8.0, 8.0, 1.0, 1.0),
            footprint(2, 8.0, 8.0, 1.0, 1.0),
        ];
        let bins = bin_and_sort(&ps, 16, 16);
        assert_eq!(bins.tile(0, 0), &[1, 2, 0]);
    }

    #[test]
    fn offscreen_box_is_not_binned() {
        let bins = bin_and_sort(&[footprint(0, -20.0, 5.0, 1.0, 1.0)], 32, 32);
        assert_eq!(bins.total_entries(), 0);
    }

    /// Brute force: a footprint belongs to a tile iff some pixel of that tile
    /// lies inside its 3-sigma box.
    #[test]
    fn membership_matches_per_pixel_overlap() {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let (w, h) = (70usize, 45usize);
        let ps: Vec<Projected2D> = (0..100)
            .map(|i| {
                let sx: f64 = rng.random_range(0.3..12.0);
                let sy: f64 = rng.random_range(0.3..12.0);
                let cov = Matrix2::new(sx * sx, 0.3 * sx * sy, 0.3 * sx * sy, sy * sy);
                Projected2D::new(
                    i,
                    Vector2::new(rng.random_range(-20.0..90.0), rng.random_range(-20.0..65.0)),
                    cov,
                    rng.random_range(0.5..5.0),
                    0.5,
                )
            })
            .collect();
        let bins = bin_and_sort(&ps, w, h);
        for ty in 0..bins.tiles_y {
            for tx in 0..bins.tiles_x {
                let mut expect: Vec<usize> = (0..ps.len())
                    .filter(|&i| {
                        let p = &ps[i];
                        (ty * TILE_SIZE..((ty + 1) * TILE_SIZE).min(h)).any(|py| {
                            (tx * TILE_SIZE..((tx + 1) * TILE_SIZE).min(w)).any(|px| {
                                (px as f64 - p.mean2d.x).abs() <= p.extent[0]
                                    && (py as f64 - p.mean2d.y).abs() <= p.extent[1]
                            })
                        })
                    })
                    .collect();
                expect.sort_by(|&a, &b| ps[a].depth.total_cmp(&ps[b].depth).then(a.cmp(&b)));
                let got: Vec<usize> = bins.tile(tx, ty).iter().map(|&i| i as usize).collect();
                assert_eq!(got, expect, "tile ({tx},{ty})");
            }
        }
    }
}

//! Vessel radius estimation via an exact Euclidean distance transform.
//!
//! The radius at a centerline pixel is defined as the Euclidean distance
//! from that pixel's center to the nearest *background* pixel center. The
//! transform is the two-pass separable algorithm of Felzenszwalb &
//! Huttenlocher (lower envelopes of parabolas), which computes exact squared
//! Euclidean distances in linear time — unlike chamfer approximations, the
//! result equals a brute-force nearest-background scan.

use crate::error::{Error, Result};
use crate::mask::ArteryMask;
use crate::raster::{BitRaster, Px};
use crate::scalar::Real;

/// Stand-in for infinity that survives the parabola-intersection arithmetic
/// (true `INFINITY` would produce `inf - inf = NaN`). Any real squared
/// distance in a raster is far below this.
const BIG: f64 = 1e20;

/// Dense per-pixel radius map, in centimeters. Values are meaningful only at
/// the foreground pixels of the mask the map was computed from.
#[derive(Debug, Clone)]
pub struct RadiusMap<T: Real> {
    rows: usize,
    cols: usize,
    data: Vec<T>,
}

impl<T: Real> RadiusMap<T> {
    /// Build a map directly from per-pixel values (row-major). Intended for
    /// synthetic data and tests; `estimate_radii` is the normal constructor.
    pub fn from_values(rows: usize, cols: usize, data: Vec<T>) -> Self {
        assert_eq!(data.len(), rows * cols, "radius data shape mismatch");
        RadiusMap { rows, cols, data }
    }

    /// Radius (cm) at a pixel; zero on background.
    pub fn get(&self, p: Px) -> T {
        self.data[p.row as usize * self.cols + p.col as usize]
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }
}

/// Exact squared Euclidean distance (in pixel units) from every pixel to the
/// nearest background pixel. Background pixels get 0.
fn squared_distance_to_background(mask: &BitRaster) -> Vec<f64> {
    let (rows, cols) = (mask.rows(), mask.cols());
    let mut grid = vec![0.0f64; rows * cols];
    for r in 0..rows {
        for c in 0..cols {
            grid[r * cols + c] = if mask.get(r as i64, c as i64) {
                BIG
            } else {
                0.0
            };
        }
    }
    // Pass 1: one-dimensional transform down each column.
    let mut col_buf = vec![0.0f64; rows.max(cols)];
    let mut out_buf = vec![0.0f64; rows.max(cols)];
    for c in 0..cols {
        for r in 0..rows {
            col_buf[r] = grid[r * cols + c];
        }
        dt_1d(&col_buf[..rows], &mut out_buf[..rows]);
        for r in 0..rows {
            grid[r * cols + c] = out_buf[r];
        }
    }
    // Pass 2: along each row.
    for r in 0..rows {
        col_buf[..cols].copy_from_slice(&grid[r * cols..(r + 1) * cols]);
        dt_1d(&col_buf[..cols], &mut out_buf[..cols]);
        grid[r * cols..(r + 1) * cols].copy_from_slice(&out_buf[..cols]);
    }
    grid
}

/// One-dimensional squared distance transform:
/// `out[i] = min_j ((i - j)^2 + f[j])`.
#[allow(clippy::needless_range_loop)] // parabola indices mirror the recurrence
fn dt_1d(f: &[f64], out: &mut [f64]) {
    let n = f.len();
    if n == 0 {
        return;
    }
    // v[k]: grid index of the k-th parabola in the lower envelope;
    // z[k]: start of the interval where it is minimal.
    let mut v = vec![0usize; n];
    let mut z = vec![0.0f64; n + 1];
    let mut k = 0usize;
    z[0] = -BIG;
    z[1] = BIG;
    for q in 1..n {
        let mut s;
        loop {
            let p = v[k];
            s = ((f[q] + (q * q) as f64) - (f[p] + (p * p) as f64)) / (2.0 * (q - p) as f64);
            if s <= z[k] {
                if k == 0 {
                    break;
                }
                k -= 1;
            } else {
                break;
            }
        }
        if s <= z[k] {
            // The new parabola dominates everything so far.
            v[0] = q;
            z[0] = -BIG;
            z[1] = BIG;
            k = 0;
        } else {
            k += 1;
            v[k] = q;
            z[k] = s;
            z[k + 1] = BIG;
        }
    }
    let mut k = 0usize;
    for q in 0..n {
        while z[k + 1] < q as f64 {
            k += 1;
        }
        let p = v[k];
        let d = q as f64 - p as f64;
        out[q] = d * d + f[p];
    }
}

/// Estimate the vessel radius at every centerline pixel.
///
/// Returns a dense map holding, for each pixel of `mask`, the distance to
/// the nearest background pixel converted to centimeters through the mask's
/// pixel pitch. Fails when a `centerline` pixel does not lie on mask
/// foreground, or when the mask has no background at all.
pub fn estimate_radii<T: Real>(
    mask: &ArteryMask<T>,
    centerline: &BitRaster,
) -> Result<RadiusMap<T>> {
    if centerline.rows() != mask.grid.rows() || centerline.cols() != mask.grid.cols() {
        return Err(Error::InvalidCenterline(format!(
            "centerline raster is {}x{} but mask is {}x{}",
            centerline.rows(),
            centerline.cols(),
            mask.grid.rows(),
            mask.grid.cols()
        )));
    }
    let d2 = squared_distance_to_background(&mask.grid);
    if d2.iter().any(|&d| d >= BIG / 2.0) {
        return Err(Error::NoBackground);
    }
    let pitch = mask.pitch_cm();
    let data: Vec<T> = d2
        .iter()
        .map(|&d| T::from_f64_lossy(d).sqrt() * pitch)
        .collect();
    let map = RadiusMap {
        rows: mask.grid.rows(),
        cols: mask.grid.cols(),
        data,
    };
    for p in centerline.fg_pixels() {
        if !mask.grid.get_px(p) {
            return Err(Error::InvalidCenterline(format!(
                "centerline pixel ({}, {}) lies on background",
                p.row, p.col
            )));
        }
    }
    Ok(map)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::raster::Ellipse;

    /// Brute-force nearest-background scan, the independent oracle for the
    /// separable transform.
    fn brute_force_distance(mask: &BitRaster, p: Px) -> f64 {
        let mut best = f64::INFINITY;
        for r in 0..mask.rows() {
            for c in 0..mask.cols() {
                if !mask.get(r as i64, c as i64) {
                    let dr = r as f64 - p.row as f64;
                    let dc = c as f64 - p.col as f64;
                    best = best.min(dr * dr + dc * dc);
                }
            }
        }
        best.sqrt()
    }

    fn mask_from(grid: BitRaster) -> ArteryMask<f64> {
        ArteryMask::new(grid, Ellipse::new(0.0, 0.0, 1.0, 1.0)).unwrap()
    }

    #[test]
    fn bar_center_radius_is_four_pixels() {
        // 7-pixel-wide bar: the center row is 4 pixels from background.
        let mut g = BitRaster::new(13, 30);
        for r in 3..10 {
            for c in 0..30 {
                g.set(r, c, true);
            }
        }
        let mut line = BitRaster::new(13, 30);
        line.set(6, 15, true);
        let m = mask_from(g);
        let radii = estimate_radii(&m, &line).unwrap();
        let r = radii.get(Px::new(6, 15));
        assert!((r - 4.0 * 6e-4).abs() < 1e-15, "got {r}");
    }

    #[test]
    fn pixel_adjacent_to_background_has_one_pixel_radius() {
        let mut g = BitRaster::new(5, 5);
        g.set(2, 2, true);
        let mut line = BitRaster::new(5, 5);
        line.set(2, 2, true);
        let radii = estimate_radii(&mask_from(g), &line).unwrap();
        assert!((radii.get(Px::new(2, 2)) - 6e-4).abs() < 1e-15);
    }

    #[test]
    fn disc_center_matches_brute_force() {
        let mut g = BitRaster::new(25, 25);
        g.fill_disc(Px::new(12, 12), 10.0);
        let center = Px::new(12, 12);
        let expect = brute_force_distance(&g, center);
        assert!((10.0..11.5).contains(&expect));
        let mut line = BitRaster::new(25, 25);
        line.set(12, 12, true);
        let radii = estimate_radii(&mask_from(g), &line).unwrap();
        assert!((radii.get(center) - expect * 6e-4).abs() < 1e-12);
    }

    #[test]
    fn transform_equals_brute_force_on_random_rasters() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        for _ in 0..20 {
            let rows = rng.gen_range(3..18);
            let cols = rng.gen_range(3..18);
            let mut g = BitRaster::new(rows, cols);
            let mut any_bg = false;
            for r in 0..rows {
                for c in 0..cols {
                    let fg = rng.gen_bool(0.7);
                    g.set(r, c, fg);
                    any_bg |= !fg;
                }
            }
            if !any_bg || g.count() == 0 {
                continue;
            }
            let m = mask_from(g.clone());
            let line = BitRaster::new(rows, cols);
            let radii = estimate_radii(&m, &line).unwrap();
            for p in g.fg_pixels() {
                let expect = brute_force_distance(&g, p) * 6e-4;
                assert!(
                    (radii.get(p) - expect).abs() < 1e-12,
                    "mismatch at ({}, {})",
                    p.row,
                    p.col
                );
            }
        }
    }

    #[test]
    fn radii_never_shrink_under_dilation() {
        use rand::{Rng, SeedableRng};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for _ in 0..10 {
            let mut g = BitRaster::new(30, 30);
            for _ in 0..rng.gen_range(1..4) {
                let center = Px::new(rng.gen_range(5..25), rng.gen_range(5..25));
                g.fill_disc(center, rng.gen_range(2.0..5.0));
            }
            if g.count() == 0 {
                continue;
            }
            let dilated = g.dilate3x3();
            if dilated.background_components4().is_empty() {
                continue;
            }
            let line = BitRaster::new(30, 30);
            let before = estimate_radii(&mask_from(g.clone()), &line).unwrap();
            let after = estimate_radii(&mask_from(dilated), &line).unwrap();
            for p in g.fg_pixels() {
                assert!(after.get(p) >= before.get(p) - 1e-15);
            }
        }
    }

    #[test]
    fn centerline_on_background_is_rejected() {
        let mut g = BitRaster::new(5, 5);
        g.set(2, 2, true);
        let mut line = BitRaster::new(5, 5);
        line.set(0, 0, true);
        let e = estimate_radii(&mask_from(g), &line);
        assert!(matches!(e, Err(Error::InvalidCenterline(_))));
    }

    #[test]
    fn all_foreground_mask_is_rejected() {
        let mut g = BitRaster::new(4, 4);
        for r in 0..4 {
            for c in 0..4 {
                g.set(r, c, true);
            }
        }
        let line = BitRaster::new(4, 4);
        let e = estimate_radii(&mask_from(g), &line);
        assert!(matches!(e, Err(Error::NoBackground)));
    }
}

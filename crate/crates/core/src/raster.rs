//! Binary raster primitives shared by the mask, skeleton, and synthesis code.
//!
//! Pixels are addressed as `(row, col)` with row 0 at the top. Foreground
//! connectivity is 8-connected throughout (the usual convention for thin
//! structures); background connectivity, where it matters, is 4-connected.

use serde::{Deserialize, Serialize};

/// A pixel coordinate, `(row, col)`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Px {
    pub row: u32,
    pub col: u32,
}

impl Px {
    pub fn new(row: u32, col: u32) -> Self {
        Px { row, col }
    }

    /// Euclidean distance to another pixel center, in pixel units.
    pub fn dist(&self, other: &Px) -> f64 {
        let dr = self.row as f64 - other.row as f64;
        let dc = self.col as f64 - other.col as f64;
        (dr * dr + dc * dc).sqrt()
    }

    /// True when the two pixels are distinct and 8-adjacent.
    pub fn adjacent8(&self, other: &Px) -> bool {
        let dr = (self.row as i64 - other.row as i64).abs();
        let dc = (self.col as i64 - other.col as i64).abs();
        dr <= 1 && dc <= 1 && (dr | dc) != 0
    }
}

/// Offsets of the 8-neighborhood in clockwise order starting at north-west.
pub const NEIGHBORS8: [(i64, i64); 8] = [
    (-1, -1),
    (-1, 0),
    (-1, 1),
    (0, 1),
    (1, 1),
    (1, 0),
    (1, -1),
    (0, -1),
];

/// Offsets of the 4-neighborhood (north, east, south, west).
pub const NEIGHBORS4: [(i64, i64); 4] = [(-1, 0), (0, 1), (1, 0), (0, -1)];

/// Dense binary raster.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BitRaster {
    rows: usize,
    cols: usize,
    data: Vec<bool>,
}

impl BitRaster {
    /// All-background raster of the given shape.
    pub fn new(rows: usize, cols: usize) -> Self {
        BitRaster {
            rows,
            cols,
            data: vec![false; rows * cols],
        }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    #[inline]
    pub fn in_bounds(&self, row: i64, col: i64) -> bool {
        row >= 0 && col >= 0 && (row as usize) < self.rows && (col as usize) < self.cols
    }

    /// Foreground test; out-of-bounds coordinates read as background.
    #[inline]
    pub fn get(&self, row: i64, col: i64) -> bool {
        self.in_bounds(row, col) && self.data[row as usize * self.cols + col as usize]
    }

    #[inline]
    pub fn get_px(&self, p: Px) -> bool {
        self.get(p.row as i64, p.col as i64)
    }

    #[inline]
    pub fn set(&mut self, row: usize, col: usize, value: bool) {
        debug_assert!(row < self.rows && col < self.cols);
        self.data[row * self.cols + col] = value;
    }

    #[inline]
    pub fn set_px(&mut self, p: Px, value: bool) {
        self.set(p.row as usize, p.col as usize, value);
    }

    /// Number of foreground pixels.
    pub fn count(&self) -> usize {
        self.data.iter().filter(|&&b| b).count()
    }

    /// Foreground pixels in raster (row-major) order.
    pub fn fg_pixels(&self) -> Vec<Px> {
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                if self.data[r * self.cols + c] {
                    out.push(Px::new(r as u32, c as u32));
                }
            }
        }
        out
    }

    /// Bitmask of the 8-neighborhood of `(row, col)`, bit `i` set when the
    /// neighbor at [`NEIGHBORS8`]`[i]` is foreground.
    #[inline]
    pub fn neighbor_mask(&self, row: i64, col: i64) -> u8 {
        let mut m = 0u8;
        for (i, (dr, dc)) in NEIGHBORS8.iter().enumerate() {
            if self.get(row + dr, col + dc) {
                m |= 1 << i;
            }
        }
        m
    }

    /// Number of foreground 8-neighbors.
    #[inline]
    pub fn degree8(&self, p: Px) -> usize {
        self.neighbor_mask(p.row as i64, p.col as i64).count_ones() as usize
    }

    /// Foreground 8-neighbors of `p` in the fixed [`NEIGHBORS8`] order.
    pub fn neighbors8(&self, p: Px) -> Vec<Px> {
        let mut out = Vec::with_capacity(8);
        for (dr, dc) in NEIGHBORS8 {
            let (r, c) = (p.row as i64 + dr, p.col as i64 + dc);
            if self.get(r, c) {
                out.push(Px::new(r as u32, c as u32));
            }
        }
        out
    }

    /// 8-connected foreground components, in deterministic order (each
    /// component is discovered at its row-major-first pixel and listed in
    /// BFS order from there).
    pub fn components8(&self) -> Vec<Vec<Px>> {
        self.components(&NEIGHBORS8, true)
    }

    /// 4-connected *background* components (used for topology checks: a mask
    /// hole is a background component not touching the outer border region).
    pub fn background_components4(&self) -> Vec<Vec<Px>> {
        self.components(&NEIGHBORS4, false)
    }

    fn components(&self, offsets: &[(i64, i64)], fg: bool) -> Vec<Vec<Px>> {
        let mut seen = vec![false; self.rows * self.cols];
        let mut out = Vec::new();
        for r in 0..self.rows {
            for c in 0..self.cols {
                let idx = r * self.cols + c;
                if seen[idx] || self.data[idx] != fg {
                    continue;
                }
                let mut comp = Vec::new();
                let mut queue = std::collections::VecDeque::new();
                seen[idx] = true;
                queue.push_back(Px::new(r as u32, c as u32));
                while let Some(p) = queue.pop_front() {
                    comp.push(p);
                    for (dr, dc) in offsets {
                        let (nr, nc) = (p.row as i64 + dr, p.col as i64 + dc);
                        if !self.in_bounds(nr, nc) {
                            continue;
                        }
                        let nidx = nr as usize * self.cols + nc as usize;
                        if !seen[nidx] && self.data[nidx] == fg {
                            seen[nidx] = true;
                            queue.push_back(Px::new(nr as u32, nc as u32));
                        }
                    }
                }
                out.push(comp);
            }
        }
        out
    }

    /// Morphological dilation with a 3x3 (8-neighborhood) structuring element.
    pub fn dilate3x3(&self) -> BitRaster {
        let mut out = BitRaster::new(self.rows, self.cols);
        for r in 0..self.rows as i64 {
            for c in 0..self.cols as i64 {
                let hit =
                    self.get(r, c) || NEIGHBORS8.iter().any(|(dr, dc)| self.get(r + dr, c + dc));
                if hit {
                    out.set(r as usize, c as usize, true);
                }
            }
        }
        out
    }

    /// Fill a disc of the given radius (in pixels) around a center; pixels
    /// whose center lies within `radius` of the center are set.
    pub fn fill_disc(&mut self, center: Px, radius: f64) {
        let r0 = (center.row as f64 - radius).floor().max(0.0) as usize;
        let r1 = ((center.row as f64 + radius).ceil() as usize).min(self.rows.saturating_sub(1));
        let c0 = (center.col as f64 - radius).floor().max(0.0) as usize;
        let c1 = ((center.col as f64 + radius).ceil() as usize).min(self.cols.saturating_sub(1));
        for r in r0..=r1 {
            for c in c0..=c1 {
                let dr = r as f64 - center.row as f64;
                let dc = c as f64 - center.col as f64;
                if dr * dr + dc * dc <= radius * radius {
                    self.data[r * self.cols + c] = true;
                }
            }
        }
    }
}

/// Axis-rotated ellipse in pixel coordinates (used for the optic-disc region).
///
/// `rotation_deg` is the angle, in degrees, from the +col axis to the
/// semi-axis `a` direction, measured toward +row (i.e. clockwise on screen).
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Ellipse {
    pub center_row: f64,
    pub center_col: f64,
    pub semi_a: f64,
    pub semi_b: f64,
    #[serde(default)]
    pub rotation_deg: f64,
}

impl Ellipse {
    pub fn new(center_row: f64, center_col: f64, semi_a: f64, semi_b: f64) -> Self {
        Ellipse {
            center_row,
            center_col,
            semi_a,
            semi_b,
            rotation_deg: 0.0,
        }
    }

    /// True when the pixel center lies inside or on the ellipse.
    pub fn contains(&self, p: Px) -> bool {
        let theta = self.rotation_deg.to_radians();
        let (sin, cos) = theta.sin_cos();
        let dx = p.col as f64 - self.center_col;
        let dy = p.row as f64 - self.center_row;
        let u = (dx * cos + dy * sin) / self.semi_a;
        let v = (-dx * sin + dy * cos) / self.semi_b;
        u * u + v * v <= 1.0
    }

    /// Euclidean distance from the ellipse center to a pixel center.
    pub fn center_dist(&self, p: Px) -> f64 {
        let dr = p.row as f64 - self.center_row;
        let dc = p.col as f64 - self.center_col;
        (dr * dr + dc * dc).sqrt()
    }
}

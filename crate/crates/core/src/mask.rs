//! Artery segmentation mask with optic-disc annotation.

use crate::error::{Error, Result};
use crate::raster::{BitRaster, Ellipse, Px};
use crate::scalar::Real;

/// Binary arterial segmentation of a fundus image, plus the optic-disc
/// ellipse and the physical pixel pitch.
///
/// The pitch converts pixel distances to physical lengths; fundus images in
/// the cohorts this crate targets are acquired at 6 um per pixel, which is
/// the default used by [`ArteryMask::new`].
#[derive(Debug, Clone)]
pub struct ArteryMask<T: Real> {
    /// Foreground = artery.
    pub grid: BitRaster,
    /// Optic-disc region; vessels inside it are pruned before graph building.
    pub od_ellipse: Ellipse,
    /// Physical size of one pixel, in micrometers.
    pub pixel_pitch_um: T,
}

/// Default pixel pitch in micrometers.
pub const DEFAULT_PIXEL_PITCH_UM: f64 = 6.0;

impl<T: Real> ArteryMask<T> {
    /// Build a mask with the default 6 um pixel pitch.
    pub fn new(grid: BitRaster, od_ellipse: Ellipse) -> Result<Self> {
        Self::with_pitch(grid, od_ellipse, T::from_f64_lossy(DEFAULT_PIXEL_PITCH_UM))
    }

    /// Build a mask with an explicit pixel pitch (micrometers per pixel).
    pub fn with_pitch(grid: BitRaster, od_ellipse: Ellipse, pixel_pitch_um: T) -> Result<Self> {
        if grid.count() == 0 {
            return Err(Error::EmptyInput("artery mask has no foreground".into()));
        }
        if !(pixel_pitch_um > T::zero()) {
            return Err(Error::InvalidField(format!(
                "pixel pitch must be positive, got {pixel_pitch_um}"
            )));
        }
        let (cr, cc) = (od_ellipse.center_row, od_ellipse.center_col);
        if !(cr >= 0.0 && cc >= 0.0 && cr < grid.rows() as f64 && cc < grid.cols() as f64) {
            return Err(Error::InvalidField(format!(
                "optic-disc center ({cr}, {cc}) lies outside the {}x{} raster",
                grid.rows(),
                grid.cols()
            )));
        }
        if !(od_ellipse.semi_a > 0.0 && od_ellipse.semi_b > 0.0) {
            return Err(Error::InvalidField(
                "optic-disc semi-axes must be positive".into(),
            ));
        }
        Ok(ArteryMask {
            grid,
            od_ellipse,
            pixel_pitch_um,
        })
    }

    /// Pixel pitch in centimeters (the internal unit system is CGS).
    pub fn pitch_cm(&self) -> T {
        self.pixel_pitch_um * T::from_f64_lossy(1e-4)
    }

    /// Physical distance between two pixel centers, in centimeters.
    pub fn dist_cm(&self, a: Px, b: Px) -> T {
        T::from_f64_lossy(a.dist(&b)) * self.pitch_cm()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn small_grid() -> BitRaster {
        let mut g = BitRaster::new(10, 10);
        g.set(5, 5, true);
        g
    }

    #[test]
    fn empty_mask_is_rejected() {
        let g = BitRaster::new(4, 4);
        let e = ArteryMask::<f64>::new(g, Ellipse::new(1.0, 1.0, 1.0, 1.0));
        assert!(matches!(e, Err(Error::EmptyInput(_))));
    }

    #[test]
    fn od_center_must_be_inside() {
        let e = ArteryMask::<f64>::new(small_grid(), Ellipse::new(50.0, 1.0, 1.0, 1.0));
        assert!(matches!(e, Err(Error::InvalidField(_))));
    }

    #[test]
    fn pitch_converts_to_cm() {
        let m = ArteryMask::<f64>::new(small_grid(), Ellipse::new(1.0, 1.0, 1.0, 1.0)).unwrap();
        assert!((m.pitch_cm() - 6e-4).abs() < 1e-18);
        let d = m.dist_cm(Px::new(0, 0), Px::new(1, 1));
        assert!((d - 6e-4 * 2f64.sqrt()).abs() < 1e-15);
    }
}

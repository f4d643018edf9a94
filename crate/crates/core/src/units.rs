//! Unit conversions between the I/O unit system and internal CGS.
//!
//! All physics runs in CGS (cm, g, s, dyn): pressures in dyn/cm^2, flows in
//! cm^3/s, viscosity in poise. Inputs and outputs use the clinical units:
//! pressure in mmHg, flow in ul/min, resistance in mmHg.min/ul; velocity
//! (cm/s) and wall shear stress (dyn/cm^2) are already CGS.

use crate::scalar::Real;

/// 1 mmHg in dyn/cm^2.
pub const MMHG_TO_DYN_CM2: f64 = 1333.22;

/// 1 ul/min in cm^3/s.
pub const UL_MIN_TO_CM3_S: f64 = 1e-3 / 60.0;

pub fn mmhg_to_cgs<T: Real>(p: T) -> T {
    p * T::from_f64_lossy(MMHG_TO_DYN_CM2)
}

pub fn cgs_to_mmhg<T: Real>(p: T) -> T {
    p / T::from_f64_lossy(MMHG_TO_DYN_CM2)
}

pub fn ulmin_to_cgs<T: Real>(q: T) -> T {
    q * T::from_f64_lossy(UL_MIN_TO_CM3_S)
}

pub fn cgs_to_ulmin<T: Real>(q: T) -> T {
    q / T::from_f64_lossy(UL_MIN_TO_CM3_S)
}

/// Hydraulic resistance from CGS (dyn.s/cm^5) to mmHg.min/ul.
pub fn resistance_cgs_to_io<T: Real>(r: T) -> T {
    r * T::from_f64_lossy(UL_MIN_TO_CM3_S / MMHG_TO_DYN_CM2)
}

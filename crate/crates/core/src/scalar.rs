//! Floating-point scalar abstraction.
//!
//! Every numeric routine in this crate is generic over [`Real`], a small
//! extension of [`num_traits::Float`] that adds the conversions and operator
//! traits the solvers need. The crate root exports `f64` aliases of the main
//! domain types; `f32` works everywhere but the shipped tolerances assume
//! `f64`.

use std::fmt::{Debug, Display};
use std::iter::Sum;

/// Scalar type used throughout the numeric core.
pub trait Real:
    num_traits::Float
    + num_traits::FloatConst
    + num_traits::FromPrimitive
    + num_traits::ToPrimitive
    + num_traits::NumAssign
    + Sum<Self>
    + Debug
    + Display
    + Default
    + Send
    + Sync
    + 'static
{
    /// Lossy conversion from `f64`; exact for `f64`, rounded for `f32`.
    fn from_f64_lossy(x: f64) -> Self {
        Self::from_f64(x).expect("finite f64 converts to any Real")
    }

    /// Shorthand for converting small exact integers.
    fn from_usize_lossy(n: usize) -> Self {
        Self::from_usize(n).expect("usize converts to any Real")
    }
}

impl Real for f32 {}
impl Real for f64 {}

/// Arithmetic mean of a slice; `None` when empty.
pub fn mean<T: Real>(xs: &[T]) -> Option<T> {
    if xs.is_empty() {
        return None;
    }
    let sum: T = xs.iter().copied().sum();
    Some(sum / T::from_usize_lossy(xs.len()))
}

/// Mean and *population* standard deviation of a slice.
///
/// The population convention (divide by `n`, not `n - 1`) is used for feature
/// standardization so that a single-element dimension yields zero spread
/// rather than a division by zero.
pub fn mean_std<T: Real>(xs: &[T]) -> Option<(T, T)> {
    let m = mean(xs)?;
    let var: T = xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len());
    Some((m, var.sqrt()))
}

/// Sample mean and *sample* standard deviation (divide by `n - 1`), the
/// convention used for the descriptive cohort tables.
pub fn mean_std_sample<T: Real>(xs: &[T]) -> Option<(T, T)> {
    let m = mean(xs)?;
    if xs.len() < 2 {
        return Some((m, T::zero()));
    }
    let var: T =
        xs.iter().map(|&x| (x - m) * (x - m)).sum::<T>() / T::from_usize_lossy(xs.len() - 1);
    Some((m, var.sqrt()))
}

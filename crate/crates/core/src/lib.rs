//! Retinal arterial hemodynamics from fundus vessel masks.
//!
//! The crate turns a binary artery mask plus an optic-disc annotation into a
//! rooted centerline forest with per-pixel vessel radii, simulates steady
//! non-Newtonian Poiseuille flow over it, and summarizes the result into
//! fixed-order feature vectors suitable for bag-of-features classification.
//!
//! Everything numeric is generic over the scalar type through [`scalar::Real`]
//! (implemented for `f32` and `f64`); the type aliases at the crate root fix
//! the default double-precision pipeline.

// `!(x > 0)`-style guards are deliberate: they must also reject NaN, which
// a rewrite to `x <= 0` or `partial_cmp` patterns would silently accept.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod bohf;
pub mod error;
pub mod extract;
pub mod features;
pub mod graph;
pub mod hemo;
pub mod io;
pub mod kmeans;
pub mod logreg;
pub mod loocv;
pub mod mask;
pub mod radii;
pub mod raster;
pub mod scalar;
pub mod seed;
pub mod skeleton;
pub mod synth;
pub mod units;

pub use error::{Error, Result};
pub use scalar::Real;

/// Double-precision artery mask.
pub type ArteryMask64 = mask::ArteryMask<f64>;
/// Double-precision radius map.
pub type RadiusMap64 = radii::RadiusMap<f64>;
/// Double-precision centerline forest.
pub type CenterlineGraph64 = graph::CenterlineGraph<f64>;
/// Double-precision scenario parameters.
pub type ScenarioParams64 = hemo::ScenarioParams<f64>;
/// Double-precision flow solution.
pub type HemodynamicSolution64 = hemo::HemodynamicSolution<f64>;
/// Double-precision feature set.
pub type FeatureSet64 = features::FeatureSet<f64>;
/// Double-precision synthetic-tree spec.
pub type SynthSpec64 = synth::SynthSpec<f64>;
/// Double-precision fitted classifier.
pub type BohfModel64 = bohf::BohfModel<f64>;
/// Double-precision cross-validation configuration.
pub type CvConfig64 = loocv::CvConfig<f64>;
/// Double-precision cross-validation report.
pub type CvReport64 = loocv::CvReport<f64>;

//! Per-element hemodynamic feature vectors.
//!
//! A solved centerline forest is summarized into a set of six-dimensional
//! feature vectors `F = [Q, P, v, R, Re, WSS]` (flow ul/min, pressure mmHg,
//! velocity cm/s, element resistance mmHg.min/ul, Reynolds number, wall
//! shear stress dyn/cm^2), one vector per *feature element*:
//!
//! * every edge contributes a **segment** element whose vector is the mean
//!   of its per-pixel vectors;
//! * every branching vertex (including a branching root) contributes a
//!   **bifurcation** element carrying the vertex state — its parent edge's
//!   last pixel, or the inlet state for a branching root;
//! * every terminal contributes a **terminal** element carrying its state.
//!
//! Roots and pass-through junction vertices contribute no element. The
//! enumeration order is deterministic: trees in order; within a tree all
//! segments by edge index, then all bifurcations by vertex index, then all
//! terminals by vertex index.

use crate::error::{Error, Result};
use crate::graph::{CenterlineGraph, GraphElementKind, VertexKind};
use crate::hemo::{HemodynamicSolution, PixelState};
use crate::scalar::Real;

/// Number of hemodynamic features per element.
pub const N_FEATURES: usize = 6;

/// Names of the feature dimensions, in vector order.
pub const FEATURE_NAMES: [&str; N_FEATURES] = ["q", "p", "v", "r", "re", "wss"];

/// One feature element of a subject.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureElement<T> {
    /// Tree index within the forest.
    pub tree: usize,
    pub kind: GraphElementKind,
    /// Edge index for segments, vertex index for bifurcations/terminals.
    pub id: usize,
    /// Vessel radius of the element (pixel mean for segments), cm. Not part
    /// of the feature vector; carried for the descriptive analyses.
    pub radius_cm: T,
    /// `[Q, P, v, R, Re, WSS]`.
    pub f: [T; N_FEATURES],
}

/// All feature elements of one subject (one solved image).
#[derive(Debug, Clone, PartialEq, Default)]
pub struct FeatureSet<T> {
    pub elements: Vec<FeatureElement<T>>,
}

impl<T: Real> FeatureSet<T> {
    pub fn len(&self) -> usize {
        self.elements.len()
    }

    pub fn is_empty(&self) -> bool {
        self.elements.is_empty()
    }

    pub fn count_kind(&self, kind: GraphElementKind) -> usize {
        self.elements.iter().filter(|e| e.kind == kind).count()
    }
}

/// Feature vector of one computational node, in [`FEATURE_NAMES`] order.
pub fn state_vector<T: Real>(s: &PixelState<T>) -> [T; N_FEATURES] {
    [
        s.q_ul_min,
        s.p_mmhg,
        s.v_cm_s,
        s.r_mmhg_min_ul,
        s.reynolds,
        s.wss_dyn_cm2,
    ]
}

/// Summarize a solved forest into its feature elements.
///
/// The solution must come from [`crate::hemo::solve`] (or have had
/// [`crate::hemo::derived_fields`] applied) and cover the same graph;
/// otherwise [`Error::IncompleteSolution`] is returned.
pub fn summarize<T: Real>(
    graph: &CenterlineGraph<T>,
    solution: &HemodynamicSolution<T>,
) -> Result<FeatureSet<T>> {
    if graph.trees.len() != solution.trees.len() {
        return Err(Error::IncompleteSolution(format!(
            "solution covers {} trees, graph has {}",
            solution.trees.len(),
            graph.trees.len()
        )));
    }
    let mut elements = Vec::new();
    for (ti, (tree, tsol)) in graph.trees.iter().zip(&solution.trees).enumerate() {
        if tree.vertices.len() != tsol.vertices.len() || tree.edges.len() != tsol.edges.len() {
            return Err(Error::IncompleteSolution(format!(
                "solution shape mismatch on tree {ti}"
            )));
        }
        for (ei, (edge, esol)) in tree.edges.iter().zip(&tsol.edges).enumerate() {
            if edge.pixels.len() != esol.pixels.len() || esol.pixels.is_empty() {
                return Err(Error::IncompleteSolution(format!(
                    "edge {ei} of tree {ti} has {} solved pixels for {} graph pixels",
                    esol.pixels.len(),
                    edge.pixels.len()
                )));
            }
            let mut acc = [T::zero(); N_FEATURES];
            let mut racc = T::zero();
            for st in &esol.pixels {
                let v = state_vector(st);
                for (a, x) in acc.iter_mut().zip(v) {
                    *a += x;
                }
                racc += st.radius_cm;
            }
            let n = T::from_usize_lossy(esol.pixels.len());
            for a in acc.iter_mut() {
                *a /= n;
            }
            elements.push(FeatureElement {
                tree: ti,
                kind: GraphElementKind::Segment,
                id: ei,
                radius_cm: racc / n,
                f: acc,
            });
        }
        for (vi, vertex) in tree.vertices.iter().enumerate() {
            if vertex.is_bifurcation_element() {
                elements.push(FeatureElement {
                    tree: ti,
                    kind: GraphElementKind::Bifurcation,
                    id: vi,
                    radius_cm: tsol.vertices[vi].radius_cm,
                    f: state_vector(&tsol.vertices[vi]),
                });
            }
        }
        for (vi, vertex) in tree.vertices.iter().enumerate() {
            if vertex.kind == VertexKind::Terminal {
                elements.push(FeatureElement {
                    tree: ti,
                    kind: GraphElementKind::Terminal,
                    id: vi,
                    radius_cm: tsol.vertices[vi].radius_cm,
                    f: state_vector(&tsol.vertices[vi]),
                });
            }
        }
    }
    Ok(FeatureSet { elements })
}

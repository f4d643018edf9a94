//! Rooted centerline forest extracted from a skeletonized artery mask.
//!
//! A [`CenterlineGraph`] is a forest of [`Tree`]s, one per connected
//! skeleton component. Vertices are the structural points (the root, the
//! bifurcation clusters, the free chain ends); edges are the pixel chains
//! between them, ordered away from the root. Every skeleton pixel belongs to
//! exactly one vertex or exactly one edge:
//!
//! * pixels with three or more skeleton neighbors form *bifurcation
//!   clusters*; adjacent branching pixels are merged into a single vertex
//!   that owns them;
//! * chain pixels (two or fewer neighbors) belong to edges — including the
//!   free end-pixels that terminals and chain-end roots mark, which exist as
//!   *virtual* vertices owning no pixels of their own;
//! * a root that falls mid-chain is promoted to a real vertex owning its
//!   pixel, splitting the chain in two.
//!
//! Per-pixel vessel radii (centimeters) travel with the pixels so that the
//! hemodynamic solver can derive element resistances without the original
//! mask.

use crate::raster::Px;
use crate::scalar::Real;

/// Classification of the feature-bearing elements of a solved graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum GraphElementKind {
    /// A pixel chain between two vertices.
    Segment,
    /// A branching vertex (including a branching root).
    Bifurcation,
    /// A free end of the forest, an outflow boundary.
    Terminal,
}

impl GraphElementKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            GraphElementKind::Segment => "segment",
            GraphElementKind::Bifurcation => "bifurcation",
            GraphElementKind::Terminal => "terminal",
        }
    }
}

/// Structural role of a vertex.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum VertexKind {
    /// Inflow point of a tree. `branching` is true when the root pixel was
    /// part of a branching cluster; such a root also acts as a bifurcation.
    Root { branching: bool },
    /// Junction with two or more children.
    Bifurcation,
    /// Free end (no children); an outflow boundary.
    Terminal,
    /// Pass-through vertex with exactly one child. Appears only when cycle
    /// breaking removes edges around a former bifurcation cluster.
    Junction,
}

/// A skeleton pixel paired with its vessel radius in centimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RPix<T> {
    pub px: Px,
    pub radius_cm: T,
}

/// Vertex of a centerline tree.
#[derive(Debug, Clone, PartialEq)]
pub struct Vertex<T: Real> {
    pub kind: VertexKind,
    /// Pixels owned by this vertex. Empty for virtual vertices (terminals
    /// and chain-end roots), whose position is carried by `rep`.
    pub pixels: Vec<RPix<T>>,
    /// Representative pixel: the owned pixel nearest the cluster centroid,
    /// or the edge end-pixel the virtual vertex marks.
    pub rep: Px,
    /// Radius at the representative pixel.
    pub rep_radius_cm: T,
    /// Edge toward the root (`None` for the root itself).
    pub parent_edge: Option<usize>,
    /// Edges away from the root, in deterministic order.
    pub child_edges: Vec<usize>,
}

impl<T: Real> Vertex<T> {
    pub fn is_root(&self) -> bool {
        matches!(self.kind, VertexKind::Root { .. })
    }

    /// True when the vertex contributes a bifurcation feature element.
    pub fn is_bifurcation_element(&self) -> bool {
        matches!(
            self.kind,
            VertexKind::Bifurcation | VertexKind::Root { branching: true }
        )
    }
}

/// Edge of a centerline tree: an ordered pixel chain running away from the
/// root, with at least one pixel. Consecutive pixels are 8-adjacent; a
/// single-pixel edge represents a zero-resistance connection.
#[derive(Debug, Clone, PartialEq)]
pub struct Edge<T: Real> {
    /// Upstream (root-side) vertex index.
    pub from: usize,
    /// Downstream vertex index.
    pub to: usize,
    /// Chain pixels, upstream to downstream.
    pub pixels: Vec<RPix<T>>,
}

impl<T: Real> Edge<T> {
    /// Mean of the per-pixel radii, the weight used for cycle breaking.
    pub fn mean_radius_cm(&self) -> T {
        let sum: T = self.pixels.iter().map(|p| p.radius_cm).sum();
        sum / T::from_usize_lossy(self.pixels.len())
    }
}

/// One rooted tree of the forest.
#[derive(Debug, Clone, PartialEq)]
pub struct Tree<T: Real> {
    pub root: usize,
    pub vertices: Vec<Vertex<T>>,
    pub edges: Vec<Edge<T>>,
}

impl<T: Real> Tree<T> {
    pub fn terminals(&self) -> impl Iterator<Item = usize> + '_ {
        self.vertices
            .iter()
            .enumerate()
            .filter(|(_, v)| v.kind == VertexKind::Terminal)
            .map(|(i, _)| i)
    }

    pub fn n_terminals(&self) -> usize {
        self.terminals().count()
    }

    pub fn n_bifurcations(&self) -> usize {
        self.vertices
            .iter()
            .filter(|v| v.is_bifurcation_element())
            .count()
    }

    /// Total number of centerline pixels (vertex-owned plus edge pixels).
    pub fn n_pixels(&self) -> usize {
        self.vertices.iter().map(|v| v.pixels.len()).sum::<usize>()
            + self.edges.iter().map(|e| e.pixels.len()).sum::<usize>()
    }
}

/// Rooted centerline forest with physical pixel pitch.
#[derive(Debug, Clone, PartialEq)]
pub struct CenterlineGraph<T: Real> {
    /// Micrometers per pixel; element lengths derive from pixel coordinates
    /// through this pitch.
    pub pixel_pitch_um: T,
    pub trees: Vec<Tree<T>>,
}

impl<T: Real> CenterlineGraph<T> {
    pub fn pitch_cm(&self) -> T {
        self.pixel_pitch_um * T::from_f64_lossy(1e-4)
    }

    pub fn n_edges(&self) -> usize {
        self.trees.iter().map(|t| t.edges.len()).sum()
    }

    pub fn n_vertices(&self) -> usize {
        self.trees.iter().map(|t| t.vertices.len()).sum()
    }

    pub fn n_terminals(&self) -> usize {
        self.trees.iter().map(|t| t.n_terminals()).sum()
    }

    pub fn n_bifurcations(&self) -> usize {
        self.trees.iter().map(|t| t.n_bifurcations()).sum()
    }

    /// Check the structural invariants; returns a description of the first
    /// violation found. Used by tests and after deserialization.
    pub fn validate(&self) -> Result<(), String> {
        for (ti, tree) in self.trees.iter().enumerate() {
            // Forest property: each tree is connected and acyclic.
            if tree.edges.len() + 1 != tree.vertices.len() {
                return Err(format!(
                    "tree {ti}: {} edges but {} vertices",
                    tree.edges.len(),
                    tree.vertices.len()
                ));
            }
            if !tree
                .vertices
                .get(tree.root)
                .map(|v| v.is_root())
                .unwrap_or(false)
            {
                return Err(format!("tree {ti}: root index is not a Root vertex"));
            }
            if tree.vertices.iter().filter(|v| v.is_root()).count() != 1 {
                return Err(format!("tree {ti}: exactly one root required"));
            }
            // Pixel partition: no pixel owned twice.
            let mut seen = std::collections::HashSet::new();
            for v in &tree.vertices {
                for p in &v.pixels {
                    if !seen.insert(p.px) {
                        return Err(format!("tree {ti}: pixel owned twice"));
                    }
                    if !(p.radius_cm > T::zero()) {
                        return Err(format!("tree {ti}: non-positive vertex radius"));
                    }
                }
            }
            for (ei, e) in tree.edges.iter().enumerate() {
                if e.pixels.is_empty() {
                    return Err(format!("tree {ti} edge {ei}: empty pixel chain"));
                }
                if e.from >= tree.vertices.len() || e.to >= tree.vertices.len() {
                    return Err(format!("tree {ti} edge {ei}: endpoint out of range"));
                }
                for pair in e.pixels.windows(2) {
                    if !pair[0].px.adjacent8(&pair[1].px) {
                        return Err(format!("tree {ti} edge {ei}: chain not 8-connected"));
                    }
                }
                for p in &e.pixels {
                    if !seen.insert(p.px) {
                        return Err(format!("tree {ti} edge {ei}: pixel owned twice"));
                    }
                    if !(p.radius_cm > T::zero()) {
                        return Err(format!("tree {ti} edge {ei}: non-positive radius"));
                    }
                }
            }
            // Orientation: walking child edges from the root visits every
            // vertex and edge exactly once.
            let mut v_seen = vec![false; tree.vertices.len()];
            let mut e_seen = vec![false; tree.edges.len()];
            let mut queue = std::collections::VecDeque::from([tree.root]);
            v_seen[tree.root] = true;
            while let Some(vi) = queue.pop_front() {
                for &ei in &tree.vertices[vi].child_edges {
                    let e = &tree.edges[ei];
                    if e.from != vi || e_seen[ei] {
                        return Err(format!("tree {ti}: bad orientation at edge {ei}"));
                    }
                    e_seen[ei] = true;
                    if v_seen[e.to] {
                        return Err(format!("tree {ti}: cycle through vertex {}", e.to));
                    }
                    if tree.vertices[e.to].parent_edge != Some(ei) {
                        return Err(format!("tree {ti}: parent link mismatch at {}", e.to));
                    }
                    v_seen[e.to] = true;
                    queue.push_back(e.to);
                }
            }
            if !v_seen.iter().all(|&b| b) || !e_seen.iter().all(|&b| b) {
                return Err(format!("tree {ti}: not connected from its root"));
            }
            // Kind consistency.
            for (vi, v) in tree.vertices.iter().enumerate() {
                let nc = v.child_edges.len();
                match v.kind {
                    VertexKind::Root { .. } => {
                        if vi != tree.root {
                            return Err(format!("tree {ti}: stray root vertex {vi}"));
                        }
                    }
                    VertexKind::Terminal => {
                        if nc != 0 {
                            return Err(format!("tree {ti}: terminal {vi} has children"));
                        }
                    }
                    VertexKind::Bifurcation => {
                        if nc < 2 {
                            return Err(format!("tree {ti}: bifurcation {vi} has {nc} children"));
                        }
                    }
                    VertexKind::Junction => {
                        if nc != 1 {
                            return Err(format!("tree {ti}: junction {vi} has {nc} children"));
                        }
                    }
                }
            }
        }
        Ok(())
    }
}

//! Synthetic vascular trees with exact Murray-law radii.
//!
//! These trees serve as ground-truth oracles: the centerline graph is
//! constructed directly (no mask, no skeletonization), every radius obeys
//! the branching law `r_parent^g = r_child1^g + r_child2^g` exactly (up to
//! floating-point rounding of the closed form), and the layout guarantees
//! that no two chains touch, so an optional rasterization followed by graph
//! extraction recovers the same topology.
//!
//! Layout: the root edge runs east from the root anchor. Each bifurcation
//! spawns two children that immediately diverge at +-45 degrees, descend
//! `h` rows diagonally, then continue east for `segment_px` pixels. The
//! displacement `h` doubles at every level toward the root, which keeps
//! sibling subtrees in disjoint row bands with a clearance proportional to
//! the root vessel width.

use rand::Rng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::features::FeatureSet;
use crate::graph::{CenterlineGraph, Edge, RPix, Tree, Vertex, VertexKind};
use crate::hemo::{solve, ScenarioParams, DEFAULT_GAMMA};
use crate::mask::ArteryMask;
use crate::raster::{BitRaster, Ellipse, Px};
use crate::scalar::Real;
use crate::seed::derive_seed;
use rand::SeedableRng;

/// Maximum supported bifurcation depth (layout coordinates stay well inside
/// `u32` at this bound).
pub const MAX_DEPTH: usize = 16;

/// Maximum raster size [`rasterize`] will allocate, in pixels.
pub const MAX_RASTER_PIXELS: usize = 30_000_000;

/// Parameters of one synthetic tree.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SynthSpec<T> {
    /// Number of bifurcation levels; 0 yields a single straight vessel.
    pub depth: usize,
    /// Radius of the root vessel, centimeters.
    pub root_radius_cm: T,
    /// Radius ratio of the narrower child to the wider child, in `(0, 1]`.
    pub asymmetry: T,
    /// Straight pixels per segment after the diagonal descent (>= 2).
    pub segment_px: usize,
    /// Branching-law exponent.
    pub gamma: T,
    /// Micrometers per pixel.
    pub pixel_pitch_um: T,
}

impl<T: Real> SynthSpec<T> {
    /// A tree of the given depth with default vessel scale: 60 um root
    /// radius, asymmetry 0.8, 8-pixel segments, 6 um pitch.
    pub fn new(depth: usize) -> Self {
        SynthSpec {
            depth,
            root_radius_cm: T::from_f64_lossy(60e-4),
            asymmetry: T::from_f64_lossy(0.8),
            segment_px: 8,
            gamma: T::from_f64_lossy(DEFAULT_GAMMA),
            pixel_pitch_um: T::from_f64_lossy(crate::mask::DEFAULT_PIXEL_PITCH_UM),
        }
    }

    /// Draw a randomized spec with depth in `1..=max_depth`, root radius in
    /// 60..100 um, asymmetry in 0.65..1.0 and segments of 4..12 pixels. The
    /// depth is clamped down where the drawn radii could not support it, so
    /// every returned spec generates successfully.
    pub fn sampled(rng: &mut ChaCha8Rng, max_depth: usize) -> Self {
        let mut spec = SynthSpec {
            depth: rng.gen_range(1..=max_depth.max(1)),
            root_radius_cm: T::from_f64_lossy(rng.gen_range(60e-4..100e-4)),
            asymmetry: T::from_f64_lossy(rng.gen_range(0.65..1.0)),
            segment_px: rng.gen_range(4..=12),
            gamma: T::from_f64_lossy(DEFAULT_GAMMA),
            pixel_pitch_um: T::from_f64_lossy(crate::mask::DEFAULT_PIXEL_PITCH_UM),
        };
        while spec.depth > 1 && spec.min_leaf_radius_cm() < spec.pitch_cm() {
            spec.depth -= 1;
        }
        spec
    }

    pub fn pitch_cm(&self) -> T {
        self.pixel_pitch_um * T::from_f64_lossy(1e-4)
    }

    /// Radii of the wider (`r1`) and narrower (`r2`) child of a parent
    /// vessel: `r1 = rp (1 + a^g)^(-1/g)`, `r2 = a r1`, which satisfies
    /// `rp^g = r1^g + r2^g` identically.
    pub fn child_radii(&self, parent_cm: T) -> (T, T) {
        let one = T::one();
        let r1 = parent_cm * (one + self.asymmetry.powf(self.gamma)).powf(-one / self.gamma);
        (r1, self.asymmetry * r1)
    }

    /// Radius of the narrowest leaf vessel.
    pub fn min_leaf_radius_cm(&self) -> T {
        let mut r = self.root_radius_cm;
        for _ in 0..self.depth {
            r = self.child_radii(r).1;
        }
        r
    }

    /// Check that these settings describe a drawable tree.
    pub fn validate(&self) -> Result<()> {
        if self.depth > MAX_DEPTH {
            return Err(Error::DepthTooLarge(format!(
                "depth {} exceeds the supported maximum {MAX_DEPTH}",
                self.depth
            )));
        }
        if self.segment_px < 2 {
            return Err(Error::InvalidField(format!(
                "segment_px must be at least 2, got {}",
                self.segment_px
            )));
        }
        for (name, v) in [
            ("root_radius_cm", self.root_radius_cm),
            ("gamma", self.gamma),
            ("pixel_pitch_um", self.pixel_pitch_um),
        ] {
            if !(v.is_finite() && v > T::zero()) {
                return Err(Error::InvalidField(format!("{name} must be positive")));
            }
        }
        if !(self.asymmetry > T::zero() && self.asymmetry <= T::one()) {
            return Err(Error::InvalidField(format!(
                "asymmetry must lie in (0, 1], got {}",
                self.asymmetry
            )));
        }
        if self.min_leaf_radius_cm() < self.pitch_cm() {
            return Err(Error::DepthTooLarge(format!(
                "leaf radius {:.3e} cm falls below the pixel pitch {:.3e} cm at depth {}",
                self.min_leaf_radius_cm().to_f64().unwrap_or(f64::NAN),
                self.pitch_cm().to_f64().unwrap_or(f64::NAN),
                self.depth
            )));
        }
        Ok(())
    }

    /// Row-band half-width unit: large enough that rasterized vessels in
    /// neighboring bands never touch.
    fn gap_unit(&self) -> i64 {
        let r_px = (self.root_radius_cm / self.pitch_cm())
            .ceil()
            .to_f64()
            .unwrap_or(1.0) as i64;
        2 * r_px.max(1) + 3
    }
}

struct Builder<T: Real> {
    vertices: Vec<Vertex<T>>,
    edges: Vec<Edge<T>>,
}

fn chain<T: Real>(pts: &[(i64, i64)], radius_cm: T) -> Vec<RPix<T>> {
    pts.iter()
        .map(|&(r, c)| RPix {
            px: Px::new(r as u32, c as u32),
            radius_cm,
        })
        .collect()
}

/// Emit the edge leaving `parent_vi` at `anchor` and recurse. `drow` is the
/// diagonal row step (0 only for the root edge, which starts on its anchor
/// pixel); `levels_below` counts the bifurcations still to emit.
#[allow(clippy::too_many_arguments)] // recursion state, not an API surface
fn grow<T: Real>(
    b: &mut Builder<T>,
    spec: &SynthSpec<T>,
    g: i64,
    parent_vi: usize,
    anchor: (i64, i64),
    drow: i64,
    levels_below: usize,
    radius_cm: T,
) {
    let (mut r, mut c) = anchor;
    let mut pts = Vec::new();
    if drow == 0 {
        pts.push((r, c));
        for _ in 1..spec.segment_px {
            c += 1;
            pts.push((r, c));
        }
    } else {
        let h = g << levels_below;
        for _ in 0..h {
            r += drow;
            c += 1;
            pts.push((r, c));
        }
        for _ in 0..spec.segment_px {
            c += 1;
            pts.push((r, c));
        }
    }
    let ei = b.edges.len();
    b.edges.push(Edge {
        from: parent_vi,
        to: usize::MAX,
        pixels: chain(&pts, radius_cm),
    });
    b.vertices[parent_vi].child_edges.push(ei);
    let (er, ec) = *pts.last().unwrap();

    if levels_below == 0 {
        let vi = b.vertices.len();
        b.vertices.push(Vertex {
            kind: VertexKind::Terminal,
            pixels: Vec::new(),
            rep: Px::new(er as u32, ec as u32),
            rep_radius_cm: radius_cm,
            parent_edge: Some(ei),
            child_edges: Vec::new(),
        });
        b.edges[ei].to = vi;
    } else {
        let j = (er, ec + 1);
        let jpx = Px::new(j.0 as u32, j.1 as u32);
        let vi = b.vertices.len();
        b.vertices.push(Vertex {
            kind: VertexKind::Bifurcation,
            pixels: vec![RPix { px: jpx, radius_cm }],
            rep: jpx,
            rep_radius_cm: radius_cm,
            parent_edge: Some(ei),
            child_edges: Vec::new(),
        });
        b.edges[ei].to = vi;
        let (r1, r2) = spec.child_radii(radius_cm);
        grow(b, spec, g, vi, j, -1, levels_below - 1, r1);
        grow(b, spec, g, vi, j, 1, levels_below - 1, r2);
    }
}

/// Build the ground-truth centerline graph for a spec.
pub fn generate_tree<T: Real>(spec: &SynthSpec<T>) -> Result<CenterlineGraph<T>> {
    spec.validate()?;
    let g = spec.gap_unit();
    let margin = g + 2;
    // Maximum upward excursion from the root row is g (2^depth - 1).
    let span = g * ((1i64 << spec.depth) - 1);
    let r0 = span + margin;
    let c0 = margin;

    let mut b = Builder {
        vertices: vec![Vertex {
            kind: VertexKind::Root { branching: false },
            pixels: Vec::new(),
            rep: Px::new(r0 as u32, c0 as u32),
            rep_radius_cm: spec.root_radius_cm,
            parent_edge: None,
            child_edges: Vec::new(),
        }],
        edges: Vec::new(),
    };
    grow(
        &mut b,
        spec,
        g,
        0,
        (r0, c0),
        0,
        spec.depth,
        spec.root_radius_cm,
    );
    let graph = CenterlineGraph {
        pixel_pitch_um: spec.pixel_pitch_um,
        trees: vec![Tree {
            root: 0,
            vertices: b.vertices,
            edges: b.edges,
        }],
    };
    graph
        .validate()
        .map_err(Error::InvalidCenterline)
        .map(|()| graph)
}

/// Sweep discs of the local vessel radius along every centerline pixel and
/// stamp an optic-disc ellipse over the root anchor, producing a mask whose
/// extracted graph reproduces the generated topology.
///
/// `od_radius_px` is the optic-disc radius in pixels; the disc is centered
/// on the root so that extraction prunes the first chain pixels and roots
/// the tree at the vessel emerging from the disc.
pub fn rasterize<T: Real>(graph: &CenterlineGraph<T>, od_radius_px: f64) -> Result<ArteryMask<T>> {
    let tree = graph
        .trees
        .first()
        .ok_or_else(|| Error::EmptyInput("cannot rasterize an empty forest".into()))?;
    let pitch_cm = graph.pitch_cm();
    let mut max_row = 0u32;
    let mut max_col = 0u32;
    let mut max_rpx = 1.0f64;
    let pixels = || {
        graph.trees.iter().flat_map(|t| {
            t.vertices
                .iter()
                .flat_map(|v| v.pixels.iter())
                .chain(t.edges.iter().flat_map(|e| e.pixels.iter()))
        })
    };
    for rp in pixels() {
        max_row = max_row.max(rp.px.row);
        max_col = max_col.max(rp.px.col);
        let rpx = (rp.radius_cm / pitch_cm).to_f64().unwrap_or(1.0);
        max_rpx = max_rpx.max(rpx);
    }
    let pad = max_rpx.ceil() as usize + 2;
    let rows = max_row as usize + pad + 1;
    let cols = max_col as usize + pad + 1;
    if rows.saturating_mul(cols) > MAX_RASTER_PIXELS {
        return Err(Error::RasterTooLarge(rows, cols));
    }
    let mut grid = BitRaster::new(rows, cols);
    for rp in pixels() {
        let rpx = (rp.radius_cm / pitch_cm).to_f64().unwrap_or(1.0);
        grid.fill_disc(rp.px, rpx);
    }
    let root_rep = tree.vertices[tree.root].rep;
    let od = Ellipse::new(
        root_rep.row as f64,
        root_rep.col as f64,
        od_radius_px,
        od_radius_px,
    );
    ArteryMask::with_pitch(grid, od, graph.pixel_pitch_um)
}

/// A labeled synthetic cohort: per-subject ids, class labels in `{-1, +1}`,
/// and solved feature sets.
#[derive(Debug, Clone, PartialEq)]
pub struct SynthCohort<T> {
    pub subject_ids: Vec<String>,
    pub labels: Vec<i8>,
    pub features: Vec<FeatureSet<T>>,
}

/// Anatomy spec of one cohort subject: the base spec with root radius and
/// asymmetry jittered by a subject-specific RNG stream.
///
/// `index` counts subjects across the whole cohort (class 0 first), so a
/// cohort is reproducible from `(base, seed)` alone.
pub fn subject_spec<T: Real>(base: &SynthSpec<T>, seed: u64, index: usize) -> SynthSpec<T> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "synth-subject", index as u64));
    let mut spec = *base;
    let jitter = T::from_f64_lossy(rng.gen_range(-0.1..0.1));
    spec.root_radius_cm = base.root_radius_cm * (T::one() + jitter);
    let da = T::from_f64_lossy(rng.gen_range(-0.05..0.05));
    spec.asymmetry = (base.asymmetry + da)
        .min(T::one())
        .max(T::from_f64_lossy(0.5));
    spec
}

/// Generate a two-class cohort of solved synthetic subjects.
///
/// Class 0 (label −1) is solved with `qt_by_class[0]` ul/min of total flow,
/// class 1 (label +1) with `qt_by_class[1]`. Each subject perturbs the base
/// spec through [`subject_spec`], so cohorts are reproducible from `seed`
/// alone.
pub fn generate_cohort<T: Real>(
    n_per_class: usize,
    qt_by_class: [T; 2],
    base: &SynthSpec<T>,
    seed: u64,
) -> Result<SynthCohort<T>> {
    if n_per_class == 0 {
        return Err(Error::EmptyGroup("n_per_class must be positive".into()));
    }
    let mut cohort = SynthCohort {
        subject_ids: Vec::new(),
        labels: Vec::new(),
        features: Vec::new(),
    };
    for (class, &qt) in qt_by_class.iter().enumerate() {
        for i in 0..n_per_class {
            let spec = subject_spec(base, seed, class * n_per_class + i);
            let graph = generate_tree(&spec)?;
            let params = ScenarioParams::with_total_flow(qt);
            let solution = solve(&graph, &params)?;
            cohort
                .features
                .push(crate::features::summarize(&graph, &solution)?);
            cohort.labels.push(if class == 0 { -1 } else { 1 });
            cohort.subject_ids.push(format!("synth-c{class}-{i:03}"));
        }
    }
    Ok(cohort)
}

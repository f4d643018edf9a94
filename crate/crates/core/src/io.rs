//! File formats for every pipeline stage.
//!
//! Masks travel as single-channel PNG (nonzero = artery), optic-disc
//! ellipses and graphs as JSON, per-pixel solutions as CSV, feature sets
//! and reports as JSON. Every floating-point number passes through
//! [`sig12`] before it is written, so a rerun with identical inputs
//! produces byte-identical files and determinism can be checked with a
//! plain byte comparison.

use std::fs::File;
use std::io::{BufReader, BufWriter, Write as _};
use std::path::Path;

use image::codecs::png::PngEncoder;
use image::{ExtendedColorType, ImageEncoder, ImageReader};
use serde::{Deserialize, Serialize};

use crate::analysis::{Sex, SubjectInfo};
use crate::error::{Error, Result};
use crate::features::{FeatureElement, FeatureSet, N_FEATURES};
use crate::graph::{CenterlineGraph, Edge, GraphElementKind, RPix, Tree, Vertex, VertexKind};
use crate::hemo::{HemodynamicSolution, PixelState, ScenarioParams};
use crate::loocv::CvReport;
use crate::mask::ArteryMask;
use crate::raster::{BitRaster, Ellipse, Px};
use crate::scalar::Real;

/// Round to 12 significant decimal digits.
///
/// Applied to every number persisted by this module; 12 digits keep far
/// more precision than any downstream tolerance while making textual
/// output stable.
pub fn sig12(x: f64) -> f64 {
    if x.is_finite() {
        format!("{x:.11e}").parse().expect("formatted float parses")
    } else {
        x
    }
}

fn r12<T: Real>(x: T) -> f64 {
    sig12(x.to_f64().expect("scalar converts to f64"))
}

/// Shortest decimal text of a float rounded to 12 significant digits.
pub fn fmt_sig12<T: Real>(x: T) -> String {
    format!("{}", r12(x))
}

fn open_reader(path: &Path) -> Result<BufReader<File>> {
    let f = File::open(path)
        .map_err(|e| Error::format(path.display().to_string(), format!("cannot open: {e}")))?;
    Ok(BufReader::new(f))
}

fn create_writer(path: &Path) -> Result<BufWriter<File>> {
    let f = File::create(path)
        .map_err(|e| Error::format(path.display().to_string(), format!("cannot create: {e}")))?;
    Ok(BufWriter::new(f))
}

/// Serialize a value as pretty JSON with a trailing newline.
pub fn write_json_pretty<V: Serialize>(path: &Path, value: &V) -> Result<()> {
    let mut w = create_writer(path)?;
    serde_json::to_writer_pretty(&mut w, value)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    writeln!(w)?;
    Ok(())
}

fn read_json<V: for<'de> Deserialize<'de>>(path: &Path) -> Result<V> {
    serde_json::from_reader(open_reader(path)?)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))
}

// ---------------------------------------------------------------------------
// Rasters
// ---------------------------------------------------------------------------

/// Read a binary raster from a single-channel image file; any nonzero
/// sample is foreground.
pub fn read_mask_png(path: &Path) -> Result<BitRaster> {
    let img = ImageReader::open(path)
        .map_err(|e| Error::format(path.display().to_string(), format!("cannot open: {e}")))?
        .decode()
        .map_err(Error::Image)?
        .to_luma8();
    let (w, h) = img.dimensions();
    let mut grid = BitRaster::new(h as usize, w as usize);
    for (x, y, p) in img.enumerate_pixels() {
        if p.0[0] != 0 {
            grid.set(y as usize, x as usize, true);
        }
    }
    Ok(grid)
}

/// Write a binary raster as an 8-bit grayscale PNG (255 = foreground).
pub fn write_mask_png(path: &Path, grid: &BitRaster) -> Result<()> {
    let (rows, cols) = (grid.rows(), grid.cols());
    let mut buf = vec![0u8; rows * cols];
    for row in 0..rows {
        for col in 0..cols {
            if grid.get(row as i64, col as i64) {
                buf[row * cols + col] = 255;
            }
        }
    }
    let w = create_writer(path)?;
    PngEncoder::new(w)
        .write_image(&buf, cols as u32, rows as u32, ExtendedColorType::L8)
        .map_err(Error::Image)?;
    Ok(())
}

/// Write an RGB raster as a PNG. `pixels` is row-major, `rows * cols` long.
pub fn write_rgb_png(path: &Path, rows: usize, cols: usize, pixels: &[[u8; 3]]) -> Result<()> {
    if pixels.len() != rows * cols {
        return Err(Error::InvalidField(format!(
            "rgb buffer holds {} pixels for a {rows} x {cols} image",
            pixels.len()
        )));
    }
    let buf: Vec<u8> = pixels.iter().flatten().copied().collect();
    let w = create_writer(path)?;
    PngEncoder::new(w)
        .write_image(&buf, cols as u32, rows as u32, ExtendedColorType::Rgb8)
        .map_err(Error::Image)?;
    Ok(())
}

/// Read an optic-disc ellipse annotation
/// (`{"center_row", "center_col", "semi_a", "semi_b", "rotation_deg"?}`).
pub fn read_od_json(path: &Path) -> Result<Ellipse> {
    read_json(path)
}

pub fn write_od_json(path: &Path, ellipse: &Ellipse) -> Result<()> {
    let rounded = Ellipse {
        center_row: sig12(ellipse.center_row),
        center_col: sig12(ellipse.center_col),
        semi_a: sig12(ellipse.semi_a),
        semi_b: sig12(ellipse.semi_b),
        rotation_deg: sig12(ellipse.rotation_deg),
    };
    write_json_pretty(path, &rounded)
}

/// Load a mask PNG and its optic-disc annotation into an [`ArteryMask`].
pub fn read_artery_mask<T: Real>(
    mask_path: &Path,
    od_path: &Path,
    pixel_pitch_um: T,
) -> Result<ArteryMask<T>> {
    let grid = read_mask_png(mask_path)?;
    let od = read_od_json(od_path)?;
    ArteryMask::with_pitch(grid, od, pixel_pitch_um)
}

// ---------------------------------------------------------------------------
// Centerline graphs
// ---------------------------------------------------------------------------

fn vertex_kind_str(kind: VertexKind) -> &'static str {
    match kind {
        VertexKind::Root { branching: false } => "root",
        VertexKind::Root { branching: true } => "root_bifurcation",
        VertexKind::Bifurcation => "bifurcation",
        VertexKind::Terminal => "terminal",
        VertexKind::Junction => "junction",
    }
}

fn parse_vertex_kind(s: &str) -> Option<VertexKind> {
    match s {
        "root" => Some(VertexKind::Root { branching: false }),
        "root_bifurcation" => Some(VertexKind::Root { branching: true }),
        "bifurcation" => Some(VertexKind::Bifurcation),
        "terminal" => Some(VertexKind::Terminal),
        "junction" => Some(VertexKind::Junction),
        _ => None,
    }
}

#[derive(Serialize, Deserialize)]
struct RPixDto {
    row: u32,
    col: u32,
    r_cm: f64,
}

impl RPixDto {
    fn from_rpix<T: Real>(p: &RPix<T>) -> Self {
        RPixDto {
            row: p.px.row,
            col: p.px.col,
            r_cm: r12(p.radius_cm),
        }
    }

    fn to_rpix<T: Real>(&self) -> RPix<T> {
        RPix {
            px: Px::new(self.row, self.col),
            radius_cm: T::from_f64_lossy(self.r_cm),
        }
    }
}

#[derive(Serialize, Deserialize)]
struct VertexDto {
    kind: String,
    pixels: Vec<RPixDto>,
    rep: [u32; 2],
    rep_radius_cm: f64,
    parent_edge: Option<usize>,
    child_edges: Vec<usize>,
}

#[derive(Serialize, Deserialize)]
struct EdgeDto {
    from: usize,
    to: usize,
    pixels: Vec<RPixDto>,
}

#[derive(Serialize, Deserialize)]
struct TreeDto {
    root: usize,
    vertices: Vec<VertexDto>,
    edges: Vec<EdgeDto>,
}

#[derive(Serialize, Deserialize)]
struct GraphDto {
    pixel_pitch_um: f64,
    trees: Vec<TreeDto>,
}

pub fn write_graph_json<T: Real>(path: &Path, graph: &CenterlineGraph<T>) -> Result<()> {
    let dto = GraphDto {
        pixel_pitch_um: r12(graph.pixel_pitch_um),
        trees: graph
            .trees
            .iter()
            .map(|t| TreeDto {
                root: t.root,
                vertices: t
                    .vertices
                    .iter()
                    .map(|v| VertexDto {
                        kind: vertex_kind_str(v.kind).to_string(),
                        pixels: v.pixels.iter().map(RPixDto::from_rpix).collect(),
                        rep: [v.rep.row, v.rep.col],
                        rep_radius_cm: r12(v.rep_radius_cm),
                        parent_edge: v.parent_edge,
                        child_edges: v.child_edges.clone(),
                    })
                    .collect(),
                edges: t
                    .edges
                    .iter()
                    .map(|e| EdgeDto {
                        from: e.from,
                        to: e.to,
                        pixels: e.pixels.iter().map(RPixDto::from_rpix).collect(),
                    })
                    .collect(),
            })
            .collect(),
    };
    write_json_pretty(path, &dto)
}

/// Read a centerline forest and check its structural invariants.
pub fn read_graph_json<T: Real>(path: &Path) -> Result<CenterlineGraph<T>> {
    let dto: GraphDto = read_json(path)?;
    let mut trees = Vec::with_capacity(dto.trees.len());
    for t in &dto.trees {
        let mut vertices = Vec::with_capacity(t.vertices.len());
        for v in &t.vertices {
            let kind = parse_vertex_kind(&v.kind).ok_or_else(|| {
                Error::format(
                    path.display().to_string(),
                    format!("unknown vertex kind '{}'", v.kind),
                )
            })?;
            vertices.push(Vertex {
                kind,
                pixels: v.pixels.iter().map(RPixDto::to_rpix).collect(),
                rep: Px::new(v.rep[0], v.rep[1]),
                rep_radius_cm: T::from_f64_lossy(v.rep_radius_cm),
                parent_edge: v.parent_edge,
                child_edges: v.child_edges.clone(),
            });
        }
        let edges = t
            .edges
            .iter()
            .map(|e| Edge {
                from: e.from,
                to: e.to,
                pixels: e.pixels.iter().map(RPixDto::to_rpix).collect(),
            })
            .collect();
        trees.push(Tree {
            root: t.root,
            vertices,
            edges,
        });
    }
    let graph = CenterlineGraph {
        pixel_pitch_um: T::from_f64_lossy(dto.pixel_pitch_um),
        trees,
    };
    graph
        .validate()
        .map_err(|m| Error::format(path.display().to_string(), m))?;
    Ok(graph)
}

// ---------------------------------------------------------------------------
// Solutions
// ---------------------------------------------------------------------------

/// Role of one solution-table row.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum RowKind {
    Root,
    RootBifurcation,
    Bifurcation,
    Junction,
    Segment,
    Terminal,
}

impl RowKind {
    pub fn as_str(self) -> &'static str {
        match self {
            RowKind::Root => "root",
            RowKind::RootBifurcation => "root_bifurcation",
            RowKind::Bifurcation => "bifurcation",
            RowKind::Junction => "junction",
            RowKind::Segment => "segment",
            RowKind::Terminal => "terminal",
        }
    }

    pub fn parse(s: &str) -> Option<Self> {
        match s {
            "root" => Some(RowKind::Root),
            "root_bifurcation" => Some(RowKind::RootBifurcation),
            "bifurcation" => Some(RowKind::Bifurcation),
            "junction" => Some(RowKind::Junction),
            "segment" => Some(RowKind::Segment),
            "terminal" => Some(RowKind::Terminal),
            _ => None,
        }
    }

    fn of_vertex(kind: VertexKind) -> Self {
        match kind {
            VertexKind::Root { branching: false } => RowKind::Root,
            VertexKind::Root { branching: true } => RowKind::RootBifurcation,
            VertexKind::Bifurcation => RowKind::Bifurcation,
            VertexKind::Terminal => RowKind::Terminal,
            VertexKind::Junction => RowKind::Junction,
        }
    }
}

/// One row of the per-pixel solution table.
#[derive(Debug, Clone, PartialEq)]
pub struct SolutionRow<T> {
    pub tree: usize,
    pub kind: RowKind,
    /// Edge index for segment rows, vertex index otherwise.
    pub id: usize,
    pub row: u32,
    pub col: u32,
    pub state: PixelState<T>,
}

/// Flatten a solved forest into table rows.
///
/// Per tree: one row per vertex-owned pixel (virtual vertices contribute a
/// single row that repeats the coordinates of the edge pixel they mark),
/// then one row per edge pixel. Vertex rows repeat the vertex's solution
/// state — including its radius — on every owned pixel, so the table alone
/// suffices to rebuild the feature set; per-pixel node radii live in the
/// graph file.
pub fn solution_rows<T: Real>(
    graph: &CenterlineGraph<T>,
    solution: &HemodynamicSolution<T>,
) -> Result<Vec<SolutionRow<T>>> {
    if solution.trees.len() != graph.trees.len() {
        return Err(Error::IncompleteSolution(format!(
            "solution covers {} trees, graph has {}",
            solution.trees.len(),
            graph.trees.len()
        )));
    }
    let mut rows = Vec::new();
    for (ti, (tree, tsol)) in graph.trees.iter().zip(&solution.trees).enumerate() {
        if tsol.vertices.len() != tree.vertices.len() || tsol.edges.len() != tree.edges.len() {
            return Err(Error::IncompleteSolution(format!(
                "tree {ti}: solution shape does not match the graph"
            )));
        }
        for (vi, v) in tree.vertices.iter().enumerate() {
            let state = tsol.vertices[vi];
            let kind = RowKind::of_vertex(v.kind);
            if v.pixels.is_empty() {
                rows.push(SolutionRow {
                    tree: ti,
                    kind,
                    id: vi,
                    row: v.rep.row,
                    col: v.rep.col,
                    state,
                });
            } else {
                for p in &v.pixels {
                    rows.push(SolutionRow {
                        tree: ti,
                        kind,
                        id: vi,
                        row: p.px.row,
                        col: p.px.col,
                        state,
                    });
                }
            }
        }
        for (ei, e) in tree.edges.iter().enumerate() {
            if tsol.edges[ei].pixels.len() != e.pixels.len() {
                return Err(Error::IncompleteSolution(format!(
                    "tree {ti} edge {ei}: {} states for {} pixels",
                    tsol.edges[ei].pixels.len(),
                    e.pixels.len()
                )));
            }
            for (p, state) in e.pixels.iter().zip(&tsol.edges[ei].pixels) {
                rows.push(SolutionRow {
                    tree: ti,
                    kind: RowKind::Segment,
                    id: ei,
                    row: p.px.row,
                    col: p.px.col,
                    state: *state,
                });
            }
        }
    }
    Ok(rows)
}

const SOLUTION_HEADER: [&str; 12] = [
    "tree",
    "kind",
    "id",
    "row",
    "col",
    "r_cm",
    "p_mmhg",
    "q_ul_min",
    "v_cm_s",
    "r_mmhg_min_ul",
    "reynolds",
    "wss_dyn_cm2",
];

pub fn write_solution_csv<T: Real>(
    path: &Path,
    graph: &CenterlineGraph<T>,
    solution: &HemodynamicSolution<T>,
) -> Result<()> {
    let rows = solution_rows(graph, solution)?;
    let mut w = csv::Writer::from_writer(create_writer(path)?);
    w.write_record(SOLUTION_HEADER)
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    for r in &rows {
        let s = &r.state;
        w.write_record([
            r.tree.to_string(),
            r.kind.as_str().to_string(),
            r.id.to_string(),
            r.row.to_string(),
            r.col.to_string(),
            fmt_sig12(s.radius_cm),
            fmt_sig12(s.p_mmhg),
            fmt_sig12(s.q_ul_min),
            fmt_sig12(s.v_cm_s),
            fmt_sig12(s.r_mmhg_min_ul),
            fmt_sig12(s.reynolds),
            fmt_sig12(s.wss_dyn_cm2),
        ])
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

pub fn read_solution_csv<T: Real>(path: &Path) -> Result<Vec<SolutionRow<T>>> {
    let pstr = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .from_reader(open_reader(path)?);
    {
        let headers = reader
            .headers()
            .map_err(|e| Error::format(&pstr, e.to_string()))?;
        if headers.len() != SOLUTION_HEADER.len() {
            return Err(Error::format(
                &pstr,
                format!(
                    "expected {} columns, found {}",
                    SOLUTION_HEADER.len(),
                    headers.len()
                ),
            ));
        }
    }
    let mut rows = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&pstr, e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim();
        let parse_u = |i: usize| -> Result<usize> {
            field(i).parse().map_err(|_| {
                Error::format(&pstr, format!("row {line}: bad integer '{}'", field(i)))
            })
        };
        let parse_f = |i: usize| -> Result<T> {
            field(i)
                .parse::<f64>()
                .map(T::from_f64_lossy)
                .map_err(|_| Error::format(&pstr, format!("row {line}: bad number '{}'", field(i))))
        };
        let kind = RowKind::parse(field(1)).ok_or_else(|| {
            Error::format(&pstr, format!("row {line}: unknown kind '{}'", field(1)))
        })?;
        rows.push(SolutionRow {
            tree: parse_u(0)?,
            kind,
            id: parse_u(2)?,
            row: parse_u(3)? as u32,
            col: parse_u(4)? as u32,
            state: PixelState {
                radius_cm: parse_f(5)?,
                p_mmhg: parse_f(6)?,
                q_ul_min: parse_f(7)?,
                v_cm_s: parse_f(8)?,
                r_mmhg_min_ul: parse_f(9)?,
                reynolds: parse_f(10)?,
                wss_dyn_cm2: parse_f(11)?,
            },
        });
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput(format!("{pstr} holds no solution rows")));
    }
    Ok(rows)
}

/// Rebuild a feature set from persisted solution rows.
///
/// Elements follow the same order as in-memory summarization: per tree,
/// segments by edge index, then bifurcations (including branching roots)
/// by vertex index, then terminals by vertex index. Plain roots and
/// junction vertices carry no element.
pub fn featurize_rows<T: Real>(rows: &[SolutionRow<T>]) -> Result<FeatureSet<T>> {
    use std::collections::BTreeMap;

    if rows.is_empty() {
        return Err(Error::EmptyInput("no solution rows to featurize".into()));
    }
    let mut segments: BTreeMap<(usize, usize), Vec<&PixelState<T>>> = BTreeMap::new();
    let mut bifurcations: BTreeMap<(usize, usize), &PixelState<T>> = BTreeMap::new();
    let mut terminals: BTreeMap<(usize, usize), &PixelState<T>> = BTreeMap::new();
    let mut n_trees = 0usize;
    for r in rows {
        n_trees = n_trees.max(r.tree + 1);
        match r.kind {
            RowKind::Segment => segments.entry((r.tree, r.id)).or_default().push(&r.state),
            RowKind::Bifurcation | RowKind::RootBifurcation => {
                bifurcations.entry((r.tree, r.id)).or_insert(&r.state);
            }
            RowKind::Terminal => {
                terminals.entry((r.tree, r.id)).or_insert(&r.state);
            }
            RowKind::Root | RowKind::Junction => {}
        }
    }

    let mut elements = Vec::new();
    for tree in 0..n_trees {
        for (&(t, id), states) in segments.range((tree, 0)..(tree + 1, 0)) {
            debug_assert_eq!(t, tree);
            let n = T::from_usize_lossy(states.len());
            let mut f = [T::zero(); N_FEATURES];
            let mut racc = T::zero();
            for s in states {
                let sf = crate::features::state_vector(s);
                for (acc, v) in f.iter_mut().zip(sf) {
                    *acc += v;
                }
                racc += s.radius_cm;
            }
            for v in &mut f {
                *v /= n;
            }
            elements.push(FeatureElement {
                tree,
                kind: GraphElementKind::Segment,
                id,
                radius_cm: racc / n,
                f,
            });
        }
        for (&(_, id), s) in bifurcations.range((tree, 0)..(tree + 1, 0)) {
            elements.push(FeatureElement {
                tree,
                kind: GraphElementKind::Bifurcation,
                id,
                radius_cm: s.radius_cm,
                f: crate::features::state_vector(s),
            });
        }
        for (&(_, id), s) in terminals.range((tree, 0)..(tree + 1, 0)) {
            elements.push(FeatureElement {
                tree,
                kind: GraphElementKind::Terminal,
                id,
                radius_cm: s.radius_cm,
                f: crate::features::state_vector(s),
            });
        }
    }
    Ok(FeatureSet { elements })
}

/// Scenario parameters plus the conservation checks of one solve.
#[derive(Serialize, Deserialize)]
pub struct SummaryDto {
    pub p0_mmhg: f64,
    pub qt_ul_min: f64,
    pub gamma: f64,
    pub rho_g_cm3: f64,
    pub plasma_viscosity_poise: f64,
    pub n_trees: usize,
    pub n_inlets: usize,
    pub n_outlets: usize,
    pub total_inflow_ul_min: f64,
    pub inflow_rel_error: f64,
    pub max_junction_imbalance_rel: f64,
    pub residual_rel: f64,
}

pub fn write_summary_json<T: Real>(path: &Path, solution: &HemodynamicSolution<T>) -> Result<()> {
    let p = &solution.params;
    let s = &solution.summary;
    write_json_pretty(
        path,
        &SummaryDto {
            p0_mmhg: r12(p.p0_mmhg),
            qt_ul_min: r12(p.qt_ul_min),
            gamma: r12(p.gamma),
            rho_g_cm3: r12(p.rho_g_cm3),
            plasma_viscosity_poise: r12(p.plasma_viscosity_poise),
            n_trees: s.n_trees,
            n_inlets: s.n_inlets,
            n_outlets: s.n_outlets,
            total_inflow_ul_min: r12(s.total_inflow_ul_min),
            inflow_rel_error: r12(s.inflow_rel_error),
            max_junction_imbalance_rel: r12(s.max_junction_imbalance_rel),
            residual_rel: r12(s.residual_rel),
        },
    )
}

// ---------------------------------------------------------------------------
// Feature sets
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct FeatureElementDto {
    tree: usize,
    kind: String,
    id: usize,
    radius_cm: f64,
    f: [f64; N_FEATURES],
}

#[derive(Serialize, Deserialize)]
struct FeatureSetDto {
    elements: Vec<FeatureElementDto>,
}

fn parse_element_kind(s: &str) -> Option<GraphElementKind> {
    match s {
        "segment" => Some(GraphElementKind::Segment),
        "bifurcation" => Some(GraphElementKind::Bifurcation),
        "terminal" => Some(GraphElementKind::Terminal),
        _ => None,
    }
}

pub fn write_features_json<T: Real>(path: &Path, features: &FeatureSet<T>) -> Result<()> {
    let dto = FeatureSetDto {
        elements: features
            .elements
            .iter()
            .map(|el| FeatureElementDto {
                tree: el.tree,
                kind: el.kind.as_str().to_string(),
                id: el.id,
                radius_cm: r12(el.radius_cm),
                f: el.f.map(r12),
            })
            .collect(),
    };
    write_json_pretty(path, &dto)
}

pub fn read_features_json<T: Real>(path: &Path) -> Result<FeatureSet<T>> {
    let dto: FeatureSetDto = read_json(path)?;
    let mut elements = Vec::with_capacity(dto.elements.len());
    for el in &dto.elements {
        let kind = parse_element_kind(&el.kind).ok_or_else(|| {
            Error::format(
                path.display().to_string(),
                format!("unknown element kind '{}'", el.kind),
            )
        })?;
        elements.push(FeatureElement {
            tree: el.tree,
            kind,
            id: el.id,
            radius_cm: T::from_f64_lossy(el.radius_cm),
            f: el.f.map(T::from_f64_lossy),
        });
    }
    if elements.is_empty() {
        return Err(Error::EmptyInput(format!(
            "{} holds no feature elements",
            path.display()
        )));
    }
    Ok(FeatureSet { elements })
}

// ---------------------------------------------------------------------------
// Labels
// ---------------------------------------------------------------------------

/// Read a labels table (`subject_id,label,age,sex`; label is -1 or +1, age
/// and sex may be empty, sex is `M` or `F`).
pub fn read_labels_csv(path: &Path) -> Result<Vec<SubjectInfo>> {
    let pstr = path.display().to_string();
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .from_reader(open_reader(path)?);
    let mut subjects = Vec::new();
    for (line, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::format(&pstr, e.to_string()))?;
        let field = |i: usize| record.get(i).unwrap_or("").trim().to_string();
        let id = field(0);
        if id.is_empty() {
            return Err(Error::format(
                &pstr,
                format!("row {line}: empty subject id"),
            ));
        }
        let label: i8 = field(1)
            .parse()
            .ok()
            .filter(|l| *l == 1 || *l == -1)
            .ok_or_else(|| Error::format(&pstr, format!("row {line}: label must be -1 or 1")))?;
        let age_s = field(2);
        let age = if age_s.is_empty() {
            None
        } else {
            Some(
                age_s
                    .parse::<f64>()
                    .map_err(|_| Error::format(&pstr, format!("row {line}: bad age '{age_s}'")))?,
            )
        };
        let sex_s = field(3);
        let sex =
            if sex_s.is_empty() {
                None
            } else {
                Some(Sex::parse(&sex_s).ok_or_else(|| {
                    Error::format(&pstr, format!("row {line}: sex must be M or F"))
                })?)
            };
        subjects.push(SubjectInfo {
            id,
            label,
            age,
            sex,
        });
    }
    if subjects.is_empty() {
        return Err(Error::EmptyInput(format!("{pstr} holds no subjects")));
    }
    Ok(subjects)
}

pub fn write_labels_csv(path: &Path, subjects: &[SubjectInfo]) -> Result<()> {
    let mut w = csv::Writer::from_writer(create_writer(path)?);
    w.write_record(["subject_id", "label", "age", "sex"])
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    for s in subjects {
        w.write_record([
            s.id.clone(),
            s.label.to_string(),
            s.age.map(fmt_sig12).unwrap_or_default(),
            s.sex.map(|x| x.as_str().to_string()).unwrap_or_default(),
        ])
        .map_err(|e| Error::format(path.display().to_string(), e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

// ---------------------------------------------------------------------------
// Evaluation reports and models
// ---------------------------------------------------------------------------

#[derive(Serialize, Deserialize)]
pub struct FoldDto {
    pub test_index: usize,
    pub subject_id: String,
    pub label: i8,
    pub k_per_class: usize,
    pub lambda: f64,
    pub score: f64,
    pub predicted: i8,
}

#[derive(Serialize, Deserialize)]
pub struct MetricsDto {
    pub n_subjects: usize,
    pub accuracy: f64,
    pub auc: f64,
    pub tp: usize,
    pub tn: usize,
    pub fp: usize,
    pub fn_: usize,
    pub permutation_aucs: Vec<f64>,
    pub permutation_mean_auc: Option<f64>,
    pub permutation_p_value: Option<f64>,
    pub folds: Vec<FoldDto>,
}

/// Write a cross-validation report; `subject_ids[i]` names fold `i`'s
/// held-out subject.
pub fn write_metrics_json<T: Real>(
    path: &Path,
    report: &CvReport<T>,
    subject_ids: &[String],
) -> Result<()> {
    let dto = MetricsDto {
        n_subjects: report.folds.len(),
        accuracy: r12(report.accuracy),
        auc: r12(report.auc),
        tp: report.tp,
        tn: report.tn,
        fp: report.fp,
        fn_: report.fn_,
        permutation_aucs: report.permutation_aucs.iter().map(|&a| r12(a)).collect(),
        permutation_mean_auc: report.permutation_mean().map(r12),
        permutation_p_value: report.permutation_p().map(r12),
        folds: report
            .folds
            .iter()
            .map(|f| FoldDto {
                test_index: f.test_index,
                subject_id: subject_ids.get(f.test_index).cloned().unwrap_or_default(),
                label: f.label,
                k_per_class: f.k_per_class,
                lambda: r12(f.lambda),
                score: r12(f.score),
                predicted: f.predicted,
            })
            .collect(),
    };
    write_json_pretty(path, &dto)
}

#[derive(Serialize, Deserialize)]
struct ModelDto {
    k_per_class: usize,
    codes: Vec<[f64; N_FEATURES]>,
    feat_mean: [f64; N_FEATURES],
    feat_std: [f64; N_FEATURES],
    code_mean: Vec<f64>,
    code_std: Vec<f64>,
    beta: Vec<f64>,
    intercept: f64,
    lambda: f64,
    grad_norm: f64,
    iterations: usize,
}

pub fn write_model_json<T: Real>(path: &Path, model: &crate::bohf::BohfModel<T>) -> Result<()> {
    let dto = ModelDto {
        k_per_class: model.codebook.k_per_class,
        codes: model.codebook.codes.iter().map(|c| c.map(r12)).collect(),
        feat_mean: model.codebook.feat_mean.map(r12),
        feat_std: model.codebook.feat_std.map(r12),
        code_mean: model.code_mean.iter().map(|&v| r12(v)).collect(),
        code_std: model.code_std.iter().map(|&v| r12(v)).collect(),
        beta: model.classifier.beta.iter().map(|&v| r12(v)).collect(),
        intercept: r12(model.classifier.intercept),
        lambda: r12(model.classifier.lambda),
        grad_norm: r12(model.classifier.grad_norm),
        iterations: model.classifier.iterations,
    };
    write_json_pretty(path, &dto)
}

/// Default physics constants for building [`ScenarioParams`] from files is
/// not needed; this helper rounds an in-memory parameter set for reports.
pub fn params_dto<T: Real>(p: &ScenarioParams<T>) -> ScenarioParams<f64> {
    ScenarioParams {
        p0_mmhg: r12(p.p0_mmhg),
        qt_ul_min: r12(p.qt_ul_min),
        gamma: r12(p.gamma),
        rho_g_cm3: r12(p.rho_g_cm3),
        plasma_viscosity_poise: r12(p.plasma_viscosity_poise),
    }
}

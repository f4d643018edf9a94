//! Steady zero-dimensional blood-flow simulation on a centerline forest.
//!
//! Every pair of consecutive centerline pixels is a Poiseuille flow element
//! with hydraulic resistance `R = 8 mu L / (pi r^4)`, where `L` is the
//! physical distance between the pixels, `r` the mean of their two radii and
//! `mu` the effective blood viscosity at that radius (an in-vitro
//! diameter-dependent law scaled by the plasma viscosity). An edge of `M`
//! pixels contributes `M - 1` series elements that all carry the edge flow;
//! a single-pixel edge is a zero-resistance connection. Boundary conditions:
//! every tree root is held at the inlet pressure `P0`, and every terminal
//! discharges a Murray-law share of the scenario's total flow, allocated
//! globally across all trees of the image. Junctions are ideal: flows
//! balance exactly and all incident points share one pressure.
//!
//! The network is linear and loop-free, so the solver merges vertices joined
//! by zero-resistance edges into supernodes, eliminates the resulting
//! conductance tree leaf-by-leaf onto the root, and back-substitutes the
//! pressure drops `D = P0 - P` (working in drop space keeps the subtraction
//! from `P0` out of the arithmetic until output time, and propagating
//! per-pixel drops as running sums of positive element drops makes pressure
//! exactly monotone along every path). Flows on resistive edges are then
//! recovered through Ohm's law from the solved drops; zero-resistance edges,
//! which Ohm's law cannot resolve, carry the boundary outflow of their
//! subtree. A per-equation relative residual over the fully assembled
//! pressure/flow system is reported with every solution.

use std::collections::VecDeque;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::DisjointSet;
use crate::graph::{CenterlineGraph, Edge, RPix, Tree};
use crate::scalar::Real;
use crate::units;

/// Default inlet (central retinal artery) pressure in mmHg.
pub const DEFAULT_P0_MMHG: f64 = 62.22;
/// Default Murray bifurcation exponent.
pub const DEFAULT_GAMMA: f64 = 2.66;
/// Default blood density in g/cm^3.
pub const DEFAULT_DENSITY_G_CM3: f64 = 1.040;
/// Default plasma viscosity in poise.
pub const DEFAULT_PLASMA_VISCOSITY_POISE: f64 = 0.012;

/// Named total-flow scenarios spanning the reported range of total retinal
/// blood flow.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Scenario {
    /// Low total flow, 30 ul/min.
    Sc1,
    /// Mid total flow, 45.6 ul/min.
    Sc2,
    /// High total flow, 80 ul/min.
    Sc3,
}

impl Scenario {
    pub const ALL: [Scenario; 3] = [Scenario::Sc1, Scenario::Sc2, Scenario::Sc3];

    /// Total retinal blood flow of the scenario in ul/min.
    pub fn total_flow_ul_min(self) -> f64 {
        match self {
            Scenario::Sc1 => 30.0,
            Scenario::Sc2 => 45.6,
            Scenario::Sc3 => 80.0,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scenario::Sc1 => "sc1",
            Scenario::Sc2 => "sc2",
            Scenario::Sc3 => "sc3",
        }
    }
}

impl std::fmt::Display for Scenario {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

impl std::str::FromStr for Scenario {
    type Err = String;

    fn from_str(s: &str) -> std::result::Result<Self, String> {
        match s.to_ascii_lowercase().as_str() {
            "sc1" | "1" => Ok(Scenario::Sc1),
            "sc2" | "2" => Ok(Scenario::Sc2),
            "sc3" | "3" => Ok(Scenario::Sc3),
            other => Err(format!(
                "unknown scenario '{other}' (expected sc1, sc2, or sc3)"
            )),
        }
    }
}

/// Physical parameters of one simulation run.
///
/// All values must be positive and finite. Pressures are mmHg, flows are
/// ul/min, density is g/cm^3, viscosity is poise.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams<T> {
    /// Inlet pressure applied at every tree root.
    pub p0_mmhg: T,
    /// Total flow distributed over all outlets of the image.
    pub qt_ul_min: T,
    /// Murray exponent for the outlet flow allocation.
    pub gamma: T,
    /// Blood density.
    pub rho_g_cm3: T,
    /// Plasma viscosity scaling the relative-viscosity law.
    pub plasma_viscosity_poise: T,
}

impl<T: Real> ScenarioParams<T> {
    /// Parameters of a named scenario with default physics constants.
    pub fn for_scenario(scenario: Scenario) -> Self {
        Self::with_total_flow(T::from_f64_lossy(scenario.total_flow_ul_min()))
    }

    /// Default physics constants with a custom total flow.
    pub fn with_total_flow(qt_ul_min: T) -> Self {
        ScenarioParams {
            p0_mmhg: T::from_f64_lossy(DEFAULT_P0_MMHG),
            qt_ul_min,
            gamma: T::from_f64_lossy(DEFAULT_GAMMA),
            rho_g_cm3: T::from_f64_lossy(DEFAULT_DENSITY_G_CM3),
            plasma_viscosity_poise: T::from_f64_lossy(DEFAULT_PLASMA_VISCOSITY_POISE),
        }
    }

    pub fn validate(&self) -> Result<()> {
        let fields = [
            ("p0_mmhg", self.p0_mmhg),
            ("qt_ul_min", self.qt_ul_min),
            ("gamma", self.gamma),
            ("rho_g_cm3", self.rho_g_cm3),
            ("plasma_viscosity_poise", self.plasma_viscosity_poise),
        ];
        for (name, value) in fields {
            if !value.is_finite() || value <= T::zero() {
                return Err(Error::InvalidField(format!(
                    "{name} must be positive and finite, got {value}"
                )));
            }
        }
        Ok(())
    }
}

/// Relative in-vitro blood viscosity as a function of vessel diameter in
/// micrometers: `220 e^(-1.3 D) + 3.2 - 2.44 e^(-0.06 D^0.645)`.
pub fn relative_viscosity_in_vitro<T: Real>(diameter_um: T) -> T {
    let d = diameter_um;
    let steep = T::from_f64_lossy(220.0) * (-T::from_f64_lossy(1.3) * d).exp();
    let plateau = T::from_f64_lossy(3.2);
    let dip = T::from_f64_lossy(2.44)
        * (-T::from_f64_lossy(0.06) * d.powf(T::from_f64_lossy(0.645))).exp();
    steep + plateau - dip
}

/// Effective blood viscosity in poise at a vessel radius in centimeters.
pub fn blood_viscosity_poise<T: Real>(radius_cm: T, plasma_viscosity_poise: T) -> Result<T> {
    if !radius_cm.is_finite() || radius_cm <= T::zero() {
        return Err(Error::InvalidRadius(format!(
            "vessel radius must be positive and finite, got {radius_cm} cm"
        )));
    }
    let diameter_um = radius_cm * T::from_f64_lossy(2.0e4);
    Ok(relative_viscosity_in_vitro(diameter_um) * plasma_viscosity_poise)
}

/// Poiseuille hydraulic resistance `8 mu L / (pi r^4)` in CGS
/// (dyn.s/cm^5).
pub fn poiseuille_resistance_cgs<T: Real>(length_cm: T, radius_cm: T, viscosity_poise: T) -> T {
    T::from_f64_lossy(8.0) * viscosity_poise * length_cm / (T::PI() * radius_cm.powi(4))
}

/// One flow element between two consecutive centerline pixels.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ElementResistance<T> {
    /// Physical length of the element (pixel pitch, times sqrt(2) on
    /// diagonal steps).
    pub length_cm: T,
    /// Mean of the two pixel radii.
    pub mean_radius_cm: T,
    /// Effective viscosity at the mean radius.
    pub viscosity_poise: T,
    /// Hydraulic resistance in CGS.
    pub resistance_cgs: T,
}

impl<T: Real> ElementResistance<T> {
    pub fn between(
        a: &RPix<T>,
        b: &RPix<T>,
        pitch_cm: T,
        plasma_viscosity_poise: T,
    ) -> Result<Self> {
        let mean_radius_cm = (a.radius_cm + b.radius_cm) / T::from_f64_lossy(2.0);
        let viscosity_poise = blood_viscosity_poise(mean_radius_cm, plasma_viscosity_poise)?;
        let length_cm = T::from_f64_lossy(a.px.dist(&b.px)) * pitch_cm;
        Ok(ElementResistance {
            length_cm,
            mean_radius_cm,
            viscosity_poise,
            resistance_cgs: poiseuille_resistance_cgs(length_cm, mean_radius_cm, viscosity_poise),
        })
    }
}

/// Allocate a total flow over outlets by Murray's law: each outlet receives
/// `beta * r^gamma` with a single `beta` chosen so the shares sum to the
/// total. Unit-preserving: the flows come back in the unit of `total_flow`.
pub fn murray_outlet_flows<T: Real>(
    outlet_radii_cm: &[T],
    total_flow: T,
    gamma: T,
) -> Result<Vec<T>> {
    if outlet_radii_cm.is_empty() {
        return Err(Error::NoOutlets(
            "cannot allocate flow over an empty outlet list".into(),
        ));
    }
    let mut weights = Vec::with_capacity(outlet_radii_cm.len());
    for &r in outlet_radii_cm {
        if !r.is_finite() || r <= T::zero() {
            return Err(Error::InvalidRadius(format!(
                "outlet radius must be positive and finite, got {r} cm"
            )));
        }
        weights.push(r.powf(gamma));
    }
    let sum: T = weights.iter().copied().sum();
    if !sum.is_finite() || sum <= T::zero() {
        return Err(Error::SolveFailure(
            "Murray weights do not sum to a positive finite value".into(),
        ));
    }
    let beta = total_flow / sum;
    Ok(weights.into_iter().map(|w| beta * w).collect())
}

/// Pointwise velocity, Reynolds number, and wall shear stress for a flow
/// `q` (cm^3/s) through a circular cross-section of radius `r` (cm):
/// `v = q / (pi r^2)`, `Re = rho 2r v / mu`, `WSS = 4 mu q / (pi r^3)`.
pub fn point_fields<T: Real>(q_cgs: T, radius_cm: T, mu_poise: T, rho_g_cm3: T) -> (T, T, T) {
    let area = T::PI() * radius_cm * radius_cm;
    let v = q_cgs / area;
    let re = rho_g_cm3 * (radius_cm + radius_cm) * v / mu_poise;
    let wss =
        T::from_f64_lossy(4.0) * mu_poise * q_cgs / (T::PI() * radius_cm * radius_cm * radius_cm);
    (v, re, wss)
}

/// Hemodynamic state at one centerline point, in output units.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PixelState<T> {
    /// Vessel radius at the point (cm).
    pub radius_cm: T,
    /// Pressure (mmHg).
    pub p_mmhg: T,
    /// Flow through the point (ul/min).
    pub q_ul_min: T,
    /// Cross-section mean velocity (cm/s).
    pub v_cm_s: T,
    /// Resistance of the element ending at this point (mmHg.min/ul); zero at
    /// the first pixel of an edge.
    pub r_mmhg_min_ul: T,
    /// Reynolds number (dimensionless).
    pub reynolds: T,
    /// Wall shear stress (dyn/cm^2).
    pub wss_dyn_cm2: T,
}

/// Solution along one edge: the common edge flow plus per-pixel states.
#[derive(Debug, Clone, PartialEq)]
pub struct EdgeSolution<T> {
    pub q_ul_min: T,
    pub pixels: Vec<PixelState<T>>,
}

/// Solution of one tree, aligned index-for-index with the graph's tree.
///
/// The root vertex reports the inlet boundary condition (pressure `P0`, the
/// total tree inflow, zero resistance, and fields at its representative
/// radius); every other vertex reports its parent edge's last pixel.
#[derive(Debug, Clone, PartialEq)]
pub struct TreeSolution<T> {
    pub inflow_ul_min: T,
    pub vertices: Vec<PixelState<T>>,
    pub edges: Vec<EdgeSolution<T>>,
}

/// Global conservation and residual diagnostics of a solution.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SolutionSummary<T> {
    pub n_trees: usize,
    /// Inlets equal trees: one root per tree.
    pub n_inlets: usize,
    pub n_outlets: usize,
    /// Requested total flow (ul/min).
    pub qt_ul_min: T,
    /// Sum of the solved tree inflows (ul/min).
    pub total_inflow_ul_min: T,
    /// `|total_inflow - qt| / qt`.
    pub inflow_rel_error: T,
    /// Largest relative flow imbalance over all vertices.
    pub max_junction_imbalance_rel: T,
    /// Largest relative residual over every equation of the assembled
    /// pressure/flow system.
    pub residual_rel: T,
}

/// Full steady-flow solution over a centerline forest.
#[derive(Debug, Clone, PartialEq)]
pub struct HemodynamicSolution<T> {
    pub params: ScenarioParams<T>,
    pub trees: Vec<TreeSolution<T>>,
    pub summary: SolutionSummary<T>,
}

/// Residuals of a solution against the assembled system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ResidualReport<T> {
    pub residual_rel: T,
    pub max_junction_imbalance_rel: T,
}

/// Solve pressures and flows and fill in the derived fields.
pub fn solve<T: Real>(
    graph: &CenterlineGraph<T>,
    params: &ScenarioParams<T>,
) -> Result<HemodynamicSolution<T>> {
    let mut solution = assemble_and_solve(graph, params)?;
    derived_fields(&mut solution, graph)?;
    Ok(solution)
}

/// Solve the pressure/flow system. Velocity, Reynolds number, and wall
/// shear stress are left at zero; [`derived_fields`] fills them in.
pub fn assemble_and_solve<T: Real>(
    graph: &CenterlineGraph<T>,
    params: &ScenarioParams<T>,
) -> Result<HemodynamicSolution<T>> {
    params.validate()?;
    if graph.trees.is_empty() {
        return Err(Error::NoArterialTree(
            "graph has no trees to simulate".into(),
        ));
    }
    let outlet_cgs = murray_boundary_cgs(graph, params)?;
    let n_outlets = outlet_cgs
        .iter()
        .flatten()
        .filter(|q| **q > T::zero())
        .count();

    let p0_cgs = units::mmhg_to_cgs(params.p0_mmhg);
    let pitch_cm = graph.pitch_cm();
    let plasma = params.plasma_viscosity_poise;

    let mut trees = Vec::with_capacity(graph.trees.len());
    for (ti, tree) in graph.trees.iter().enumerate() {
        trees.push(solve_tree(
            tree,
            &outlet_cgs[ti],
            params.p0_mmhg,
            p0_cgs,
            pitch_cm,
            plasma,
        )?);
    }

    let total_inflow: T = trees.iter().map(|t| t.inflow_ul_min).sum();
    let mut solution = HemodynamicSolution {
        params: *params,
        trees,
        summary: SolutionSummary {
            n_trees: graph.trees.len(),
            n_inlets: graph.trees.len(),
            n_outlets,
            qt_ul_min: params.qt_ul_min,
            total_inflow_ul_min: total_inflow,
            inflow_rel_error: (total_inflow - params.qt_ul_min).abs() / params.qt_ul_min,
            max_junction_imbalance_rel: T::zero(),
            residual_rel: T::zero(),
        },
    };
    let report = system_residual(graph, &solution)?;
    solution.summary.residual_rel = report.residual_rel;
    solution.summary.max_junction_imbalance_rel = report.max_junction_imbalance_rel;
    Ok(solution)
}

/// Fill velocity, Reynolds number, and wall shear stress from the solved
/// pressures and flows, then refresh the vertex states (non-root vertices
/// mirror their parent edge's last pixel).
pub fn derived_fields<T: Real>(
    solution: &mut HemodynamicSolution<T>,
    graph: &CenterlineGraph<T>,
) -> Result<()> {
    check_coverage(graph, solution)?;
    let plasma = solution.params.plasma_viscosity_poise;
    let rho = solution.params.rho_g_cm3;
    for (tree, tsol) in graph.trees.iter().zip(solution.trees.iter_mut()) {
        for esol in tsol.edges.iter_mut() {
            for state in esol.pixels.iter_mut() {
                let q_cgs = units::ulmin_to_cgs(state.q_ul_min);
                let mu = blood_viscosity_poise(state.radius_cm, plasma)?;
                let (v, re, wss) = point_fields(q_cgs, state.radius_cm, mu, rho);
                state.v_cm_s = v;
                state.reynolds = re;
                state.wss_dyn_cm2 = wss;
            }
        }
        for (vi, vertex) in tree.vertices.iter().enumerate() {
            if vi == tree.root {
                let state = tsol.vertices[vi];
                let q_cgs = units::ulmin_to_cgs(state.q_ul_min);
                let mu = blood_viscosity_poise(state.radius_cm, plasma)?;
                let (v, re, wss) = point_fields(q_cgs, state.radius_cm, mu, rho);
                let state = &mut tsol.vertices[vi];
                state.v_cm_s = v;
                state.reynolds = re;
                state.wss_dyn_cm2 = wss;
            } else {
                let pe = vertex.parent_edge.ok_or_else(|| {
                    Error::SolveFailure("non-root vertex without a parent edge".into())
                })?;
                tsol.vertices[vi] = *tsol.edges[pe]
                    .pixels
                    .last()
                    .expect("edges always have at least one pixel");
            }
        }
    }
    Ok(())
}

/// Evaluate the relative residual of every equation of the assembled
/// pressure/flow system against a solution: the root pressure boundary rows,
/// the per-element Poiseuille rows, the zero-resistance attachment rows, the
/// per-vertex mass balances (whose terminal rows are the Murray outflow
/// boundary conditions), and the global inflow row. Each residual is scaled
/// by the magnitudes of its own terms.
pub fn system_residual<T: Real>(
    graph: &CenterlineGraph<T>,
    solution: &HemodynamicSolution<T>,
) -> Result<ResidualReport<T>> {
    check_coverage(graph, solution)?;
    let params = &solution.params;
    params.validate()?;
    let outlet_cgs = murray_boundary_cgs(graph, params)?;
    let p0_cgs = units::mmhg_to_cgs(params.p0_mmhg);
    let pitch_cm = graph.pitch_cm();
    let plasma = params.plasma_viscosity_poise;

    let rel = |lhs: T, den: T| {
        if den > T::zero() {
            lhs.abs() / den
        } else {
            lhs.abs()
        }
    };

    let mut max_row = T::zero();
    let mut max_mass = T::zero();
    let mut total_in_cgs = T::zero();
    for (ti, (tree, tsol)) in graph.trees.iter().zip(&solution.trees).enumerate() {
        // Inlet pressure boundary condition.
        let p_root = units::mmhg_to_cgs(tsol.vertices[tree.root].p_mmhg);
        max_row = max_row.max(rel(p_root - p0_cgs, p_root.abs() + p0_cgs.abs()));

        for (edge, esol) in tree.edges.iter().zip(&tsol.edges) {
            let q = units::ulmin_to_cgs(esol.q_ul_min);
            // Zero-resistance attachment to the upstream vertex.
            let p_up = units::mmhg_to_cgs(tsol.vertices[edge.from].p_mmhg);
            let p_first = units::mmhg_to_cgs(esol.pixels[0].p_mmhg);
            max_row = max_row.max(rel(p_first - p_up, p_first.abs() + p_up.abs()));
            // Poiseuille rows, one per element.
            for (j, pair) in edge.pixels.windows(2).enumerate() {
                let r_elem = ElementResistance::between(&pair[0], &pair[1], pitch_cm, plasma)?
                    .resistance_cgs;
                let p_a = units::mmhg_to_cgs(esol.pixels[j].p_mmhg);
                let p_b = units::mmhg_to_cgs(esol.pixels[j + 1].p_mmhg);
                let drop = r_elem * q;
                let lhs = (p_a - p_b) - drop;
                max_row = max_row.max(rel(lhs, p_a.abs() + p_b.abs() + drop.abs()));
            }
            // Zero-resistance attachment to the downstream vertex.
            let p_down = units::mmhg_to_cgs(tsol.vertices[edge.to].p_mmhg);
            let p_last =
                units::mmhg_to_cgs(esol.pixels.last().expect("edges always have pixels").p_mmhg);
            max_row = max_row.max(rel(p_last - p_down, p_last.abs() + p_down.abs()));
        }

        // Mass balance at every vertex. Terminal rows compare the incoming
        // edge flow against the Murray boundary outflow.
        for (vi, vertex) in tree.vertices.iter().enumerate() {
            let mut out = outlet_cgs[ti][vi];
            let mut den = out.abs();
            for &ce in &vertex.child_edges {
                let qc = units::ulmin_to_cgs(tsol.edges[ce].q_ul_min);
                out += qc;
                den += qc.abs();
            }
            let q_in = match vertex.parent_edge {
                Some(pe) => units::ulmin_to_cgs(tsol.edges[pe].q_ul_min),
                None => units::ulmin_to_cgs(tsol.vertices[vi].q_ul_min),
            };
            let row = rel(q_in - out, q_in.abs() + den);
            max_row = max_row.max(row);
            max_mass = max_mass.max(row);
        }
        total_in_cgs += units::ulmin_to_cgs(tsol.inflow_ul_min);
    }
    // Global mass: tree inflows add up to the scenario total.
    let qt_cgs = units::ulmin_to_cgs(params.qt_ul_min);
    max_row = max_row.max(rel(
        total_in_cgs - qt_cgs,
        total_in_cgs.abs() + qt_cgs.abs(),
    ));

    Ok(ResidualReport {
        residual_rel: max_row,
        max_junction_imbalance_rel: max_mass,
    })
}

/// Murray boundary outflows in CGS, indexed `[tree][vertex]` (zero at
/// non-terminal vertices). The allocation is global: one `beta` across all
/// trees of the graph.
fn murray_boundary_cgs<T: Real>(
    graph: &CenterlineGraph<T>,
    params: &ScenarioParams<T>,
) -> Result<Vec<Vec<T>>> {
    let mut slots = Vec::new();
    let mut radii = Vec::new();
    for (ti, tree) in graph.trees.iter().enumerate() {
        for vi in tree.terminals() {
            slots.push((ti, vi));
            radii.push(tree.vertices[vi].rep_radius_cm);
        }
    }
    let flows_io = murray_outlet_flows(&radii, params.qt_ul_min, params.gamma)?;
    let mut outlet_cgs: Vec<Vec<T>> = graph
        .trees
        .iter()
        .map(|t| vec![T::zero(); t.vertices.len()])
        .collect();
    for (&(ti, vi), &q) in slots.iter().zip(flows_io.iter()) {
        outlet_cgs[ti][vi] = units::ulmin_to_cgs(q);
    }
    Ok(outlet_cgs)
}

fn check_coverage<T: Real>(
    graph: &CenterlineGraph<T>,
    solution: &HemodynamicSolution<T>,
) -> Result<()> {
    if graph.trees.len() != solution.trees.len() {
        return Err(Error::IncompleteSolution(format!(
            "solution covers {} trees, graph has {}",
            solution.trees.len(),
            graph.trees.len()
        )));
    }
    for (ti, (tree, tsol)) in graph.trees.iter().zip(&solution.trees).enumerate() {
        if tree.vertices.len() != tsol.vertices.len() || tree.edges.len() != tsol.edges.len() {
            return Err(Error::IncompleteSolution(format!(
                "solution shape mismatch on tree {ti}"
            )));
        }
        for (ei, (edge, esol)) in tree.edges.iter().zip(&tsol.edges).enumerate() {
            if edge.pixels.len() != esol.pixels.len() {
                return Err(Error::IncompleteSolution(format!(
                    "solution covers {} pixels of edge {ei} in tree {ti}, graph has {}",
                    esol.pixels.len(),
                    edge.pixels.len()
                )));
            }
        }
    }
    Ok(())
}

fn edge_elements<T: Real>(edge: &Edge<T>, pitch_cm: T, plasma: T) -> Result<Vec<T>> {
    let mut elements = Vec::with_capacity(edge.pixels.len().saturating_sub(1));
    for pair in edge.pixels.windows(2) {
        elements
            .push(ElementResistance::between(&pair[0], &pair[1], pitch_cm, plasma)?.resistance_cgs);
    }
    Ok(elements)
}

fn solve_tree<T: Real>(
    tree: &Tree<T>,
    outlet_cgs: &[T],
    p0_mmhg: T,
    p0_cgs: T,
    pitch_cm: T,
    plasma: T,
) -> Result<TreeSolution<T>> {
    let nv = tree.vertices.len();
    let ne = tree.edges.len();

    // Element and edge resistances. An edge is zero-resistance exactly when
    // it has a single pixel (no elements).
    let mut elem_r: Vec<Vec<T>> = Vec::with_capacity(ne);
    let mut edge_r: Vec<T> = Vec::with_capacity(ne);
    for edge in &tree.edges {
        let elements = edge_elements(edge, pitch_cm, plasma)?;
        let total: T = elements.iter().copied().sum();
        elem_r.push(elements);
        edge_r.push(total);
    }

    // Merge vertices joined by zero-resistance edges into supernodes; they
    // share one pressure unknown.
    let mut dsu = DisjointSet::new(nv);
    for (ei, edge) in tree.edges.iter().enumerate() {
        if edge_r[ei] == T::zero() {
            dsu.union(edge.from, edge.to);
        }
    }

    // Conductance adjacency between supernode representatives.
    let mut adj: Vec<Vec<(usize, T)>> = vec![Vec::new(); nv];
    for (ei, edge) in tree.edges.iter().enumerate() {
        if edge_r[ei] > T::zero() {
            let a = dsu.find(edge.from);
            let b = dsu.find(edge.to);
            debug_assert_ne!(a, b, "resistive edge inside one supernode");
            adj[a].push((b, edge_r[ei]));
            adj[b].push((a, edge_r[ei]));
        }
    }

    // Boundary outflow injections, accumulated per supernode.
    let mut w = vec![T::zero(); nv];
    for (vi, &q) in outlet_cgs.iter().enumerate() {
        if q != T::zero() {
            let rep = dsu.find(vi);
            w[rep] += q;
        }
    }

    let root_sn = dsu.find(tree.root);
    let mut reps = Vec::new();
    for v in 0..nv {
        if dsu.find(v) == v {
            reps.push(v);
        }
    }

    // Leaf-eliminate the supernode tree onto the root. Each elimination
    // pushes the leaf's accumulated flow into its neighbor and records the
    // resistance for back-substitution of the drops D = P0 - P.
    let mut deg: Vec<usize> = adj.iter().map(|a| a.len()).collect();
    let mut removed = vec![false; nv];
    let mut queue: VecDeque<usize> = reps
        .iter()
        .copied()
        .filter(|&v| v != root_sn && deg[v] == 1)
        .collect();
    let mut order: Vec<(usize, usize, T, T)> = Vec::new();
    while let Some(v) = queue.pop_front() {
        if removed[v] || v == root_sn {
            continue;
        }
        let mut attach = None;
        for &(u, r) in &adj[v] {
            if !removed[u] {
                attach = Some((u, r));
                break;
            }
        }
        let (u, r) = attach.ok_or_else(|| {
            Error::SolveFailure("supernode tree disconnected during elimination".into())
        })?;
        order.push((v, u, r, w[v]));
        let wv = w[v];
        w[u] += wv;
        removed[v] = true;
        deg[u] -= 1;
        if deg[u] == 1 && u != root_sn {
            queue.push_back(u);
        }
    }
    for &v in &reps {
        if v != root_sn && !removed[v] {
            return Err(Error::SolveFailure(
                "supernode network is not a rooted tree".into(),
            ));
        }
    }

    // Back-substitute supernode drops; the root sits at drop zero.
    let mut sn_drop = vec![T::zero(); nv];
    for &(v, u, r, wv) in order.iter().rev() {
        sn_drop[v] = sn_drop[u] + wv * r;
    }

    // Vertex preorder (every parent before its children).
    let preorder = {
        let mut out = Vec::with_capacity(nv);
        let mut stack = vec![tree.root];
        while let Some(v) = stack.pop() {
            out.push(v);
            for &ce in tree.vertices[v].child_edges.iter().rev() {
                stack.push(tree.edges[ce].to);
            }
        }
        out
    };
    if preorder.len() != nv {
        return Err(Error::SolveFailure(
            "tree orientation does not reach every vertex".into(),
        ));
    }

    // Subtree boundary outflow, bottom-up; it resolves the flow on
    // zero-resistance edges where Ohm's law is indeterminate.
    let mut subtree = outlet_cgs.to_vec();
    for &v in preorder.iter().rev() {
        for &ce in &tree.vertices[v].child_edges {
            let child_sum = subtree[tree.edges[ce].to];
            subtree[v] += child_sum;
        }
    }

    // Edge flows: Ohm's law from the solved drops on resistive edges.
    let mut q_edge = vec![T::zero(); ne];
    for (ei, edge) in tree.edges.iter().enumerate() {
        q_edge[ei] = if edge_r[ei] > T::zero() {
            let a = dsu.find(edge.from);
            let b = dsu.find(edge.to);
            (sn_drop[b] - sn_drop[a]) / edge_r[ei]
        } else {
            subtree[edge.to]
        };
    }

    // Per-pixel drops as running sums of positive element drops, so pressure
    // is exactly non-increasing along every root-to-leaf pixel path.
    let mut v_drop = vec![T::zero(); nv];
    let mut pixel_drop: Vec<Vec<T>> = tree
        .edges
        .iter()
        .map(|e| vec![T::zero(); e.pixels.len()])
        .collect();
    for &v in &preorder {
        for &ce in &tree.vertices[v].child_edges {
            let mut d = v_drop[v];
            pixel_drop[ce][0] = d;
            for (j, r) in elem_r[ce].iter().enumerate() {
                d += q_edge[ce] * *r;
                pixel_drop[ce][j + 1] = d;
            }
            v_drop[tree.edges[ce].to] = d;
        }
    }

    // Assemble the per-edge solution in output units.
    let mut edges_out = Vec::with_capacity(ne);
    for (ei, edge) in tree.edges.iter().enumerate() {
        let q_io = units::cgs_to_ulmin(q_edge[ei]);
        let mut pixels = Vec::with_capacity(edge.pixels.len());
        for (j, rp) in edge.pixels.iter().enumerate() {
            let r_io = if j == 0 {
                T::zero()
            } else {
                units::resistance_cgs_to_io(elem_r[ei][j - 1])
            };
            pixels.push(PixelState {
                radius_cm: rp.radius_cm,
                p_mmhg: units::cgs_to_mmhg(p0_cgs - pixel_drop[ei][j]),
                q_ul_min: q_io,
                v_cm_s: T::zero(),
                r_mmhg_min_ul: r_io,
                reynolds: T::zero(),
                wss_dyn_cm2: T::zero(),
            });
        }
        edges_out.push(EdgeSolution {
            q_ul_min: q_io,
            pixels,
        });
    }

    let mut inflow_cgs = T::zero();
    for &ce in &tree.vertices[tree.root].child_edges {
        inflow_cgs += q_edge[ce];
    }

    // Vertex states: the root reports the inlet boundary condition; every
    // other vertex mirrors its parent edge's last pixel.
    let mut vertices_out = Vec::with_capacity(nv);
    for (vi, vertex) in tree.vertices.iter().enumerate() {
        let state = if vi == tree.root {
            PixelState {
                radius_cm: vertex.rep_radius_cm,
                p_mmhg: p0_mmhg,
                q_ul_min: units::cgs_to_ulmin(inflow_cgs),
                v_cm_s: T::zero(),
                r_mmhg_min_ul: T::zero(),
                reynolds: T::zero(),
                wss_dyn_cm2: T::zero(),
            }
        } else {
            let pe = vertex.parent_edge.ok_or_else(|| {
                Error::SolveFailure("non-root vertex without a parent edge".into())
            })?;
            *edges_out[pe]
                .pixels
                .last()
                .expect("edges always have at least one pixel")
        };
        vertices_out.push(state);
    }

    Ok(TreeSolution {
        inflow_ul_min: units::cgs_to_ulmin(inflow_cgs),
        vertices: vertices_out,
        edges: edges_out,
    })
}

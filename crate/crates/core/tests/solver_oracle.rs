//! Cross-validation of the flow solver against an independent oracle.
//!
//! The oracle below re-derives every physical quantity from scratch — its
//! own viscosity law, its own resistance formula, its own Murray
//! allocation — and solves each tree by plain recursive traversal: edge
//! flows as bottom-up sums of outlet flows, pressures as top-down drops.
//! The production solver must agree with it to near machine precision on
//! randomized tree batches. The two routes are kept deliberately separate;
//! do not refactor one in terms of the other.

use fundusflow::graph::{CenterlineGraph, Tree, VertexKind};
use fundusflow::hemo::{solve, Scenario, ScenarioParams};
use fundusflow::synth::{generate_tree, SynthSpec};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

mod oracle {
    use super::*;

    const MMHG_PER_DYN_CM2: f64 = 1.0 / 1333.22;
    const CM3_S_PER_UL_MIN: f64 = 1e-3 / 60.0;

    fn eta_rel(d_um: f64) -> f64 {
        220.0 * (-1.3 * d_um).exp() + 3.2 - 2.44 * (-0.06 * d_um.powf(0.645)).exp()
    }

    fn viscosity(radius_cm: f64, plasma: f64) -> f64 {
        plasma * eta_rel(2.0e4 * radius_cm)
    }

    fn element_resistance_cgs(
        a: &fundusflow::graph::RPix<f64>,
        b: &fundusflow::graph::RPix<f64>,
        pitch_cm: f64,
        plasma: f64,
    ) -> f64 {
        let rm = 0.5 * (a.radius_cm + b.radius_cm);
        let len = a.px.dist(&b.px) * pitch_cm;
        8.0 * viscosity(rm, plasma) * len / (std::f64::consts::PI * rm.powi(4))
    }

    pub struct OracleTree {
        /// Flow through each edge, ul/min.
        pub edge_q_ul_min: Vec<f64>,
        /// Pressure at every pixel of every edge, mmHg.
        pub edge_p_mmhg: Vec<Vec<f64>>,
        /// Pressure at each vertex, mmHg.
        pub vertex_p_mmhg: Vec<f64>,
        /// Tree inflow, ul/min.
        pub inflow_ul_min: f64,
        /// Murray outlet flow per terminal vertex index, ul/min.
        pub outlet_q_ul_min: Vec<(usize, f64)>,
    }

    fn subtree_flow(tree: &Tree<f64>, vi: usize, beta: f64, gamma: f64) -> f64 {
        let v = &tree.vertices[vi];
        if v.kind == VertexKind::Terminal {
            beta * v.rep_radius_cm.powf(gamma)
        } else {
            v.child_edges
                .iter()
                .map(|&ei| subtree_flow(tree, tree.edges[ei].to, beta, gamma))
                .sum()
        }
    }

    pub fn solve_forest(
        graph: &CenterlineGraph<f64>,
        params: &ScenarioParams<f64>,
    ) -> Vec<OracleTree> {
        let pitch_cm = graph.pixel_pitch_um * 1e-4;
        // One global Murray constant across the whole forest.
        let weight_sum: f64 = graph
            .trees
            .iter()
            .flat_map(|t| t.vertices.iter())
            .filter(|v| v.kind == VertexKind::Terminal)
            .map(|v| v.rep_radius_cm.powf(params.gamma))
            .sum();
        let beta = params.qt_ul_min / weight_sum;

        graph
            .trees
            .iter()
            .map(|tree| {
                let nv = tree.vertices.len();
                let mut edge_q = vec![0.0; tree.edges.len()];
                for (ei, e) in tree.edges.iter().enumerate() {
                    edge_q[ei] = subtree_flow(tree, e.to, beta, params.gamma);
                }
                let mut vertex_p = vec![f64::NAN; nv];
                let mut edge_p: Vec<Vec<f64>> = vec![Vec::new(); tree.edges.len()];
                vertex_p[tree.root] = params.p0_mmhg;
                // Parents-first traversal: drop pressure down every chain.
                let mut stack = vec![tree.root];
                while let Some(vi) = stack.pop() {
                    for &ei in &tree.vertices[vi].child_edges {
                        let e = &tree.edges[ei];
                        let q_cgs = edge_q[ei] * CM3_S_PER_UL_MIN;
                        let mut p = vertex_p[vi];
                        let mut ps = Vec::with_capacity(e.pixels.len());
                        ps.push(p);
                        for w in e.pixels.windows(2) {
                            let r = element_resistance_cgs(
                                &w[0],
                                &w[1],
                                pitch_cm,
                                params.plasma_viscosity_poise,
                            );
                            p -= q_cgs * r * MMHG_PER_DYN_CM2;
                            ps.push(p);
                        }
                        vertex_p[e.to] = *ps.last().unwrap();
                        edge_p[ei] = ps;
                        stack.push(e.to);
                    }
                }
                let outlets = tree
                    .vertices
                    .iter()
                    .enumerate()
                    .filter(|(_, v)| v.kind == VertexKind::Terminal)
                    .map(|(vi, v)| (vi, beta * v.rep_radius_cm.powf(params.gamma)))
                    .collect();
                OracleTree {
                    inflow_ul_min: tree.vertices[tree.root]
                        .child_edges
                        .iter()
                        .map(|&ei| subtree_flow(tree, tree.edges[ei].to, beta, params.gamma))
                        .sum::<f64>(),
                    edge_q_ul_min: edge_q,
                    edge_p_mmhg: edge_p,
                    vertex_p_mmhg: vertex_p,
                    outlet_q_ul_min: outlets,
                }
            })
            .collect()
    }
}

fn seeded_specs(seed: u64, n: usize, max_depth: usize) -> Vec<SynthSpec<f64>> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|_| SynthSpec::sampled(&mut rng, max_depth))
        .collect()
}

fn rel(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

#[test]
fn traversal_oracle_matches_solver_on_seeded_trees() {
    let specs = seeded_specs(2024, 30, 6);
    for (i, spec) in specs.iter().enumerate() {
        let graph = generate_tree(spec).unwrap();
        let params = ScenarioParams::for_scenario(Scenario::ALL[i % 3]);
        let sol = solve(&graph, &params).unwrap();
        let ora = oracle::solve_forest(&graph, &params);

        let (ot, st) = (&ora[0], &sol.trees[0]);
        assert!(
            rel(ot.inflow_ul_min, st.inflow_ul_min) < 1e-9,
            "tree {i}: inflow {} vs {}",
            st.inflow_ul_min,
            ot.inflow_ul_min
        );
        for (ei, eo) in ot.edge_q_ul_min.iter().enumerate() {
            assert!(
                rel(*eo, st.edges[ei].q_ul_min) < 1e-9,
                "tree {i} edge {ei}: q {} vs {}",
                st.edges[ei].q_ul_min,
                eo
            );
        }
        for (ei, ps) in ot.edge_p_mmhg.iter().enumerate() {
            for (pi, po) in ps.iter().enumerate() {
                let p = st.edges[ei].pixels[pi].p_mmhg;
                assert!(
                    (p - po).abs() / params.p0_mmhg < 1e-9,
                    "tree {i} edge {ei} pixel {pi}: p {p} vs {po}"
                );
            }
        }
        for (vi, po) in ot.vertex_p_mmhg.iter().enumerate() {
            assert!((st.vertices[vi].p_mmhg - po).abs() / params.p0_mmhg < 1e-9);
        }
    }
}

#[test]
fn murray_outlets_are_honored_by_the_solver() {
    for (i, spec) in seeded_specs(7, 10, 5).iter().enumerate() {
        let graph = generate_tree(spec).unwrap();
        let params = ScenarioParams::for_scenario(Scenario::Sc2);
        let sol = solve(&graph, &params).unwrap();
        let ora = oracle::solve_forest(&graph, &params);
        for &(vi, qo) in &ora[0].outlet_q_ul_min {
            let qs = sol.trees[0].vertices[vi].q_ul_min;
            assert!(rel(qs, qo) < 1e-9, "spec {i} terminal {vi}: {qs} vs {qo}");
        }
    }
}

#[test]
fn two_tree_forest_shares_one_murray_constant() {
    let mut rng = ChaCha8Rng::seed_from_u64(99);
    let a = generate_tree(&SynthSpec::<f64>::sampled(&mut rng, 4)).unwrap();
    let b = generate_tree(&SynthSpec::<f64>::sampled(&mut rng, 5)).unwrap();
    let forest = CenterlineGraph {
        pixel_pitch_um: a.pixel_pitch_um,
        trees: vec![a.trees[0].clone(), b.trees[0].clone()],
    };
    let params = ScenarioParams::for_scenario(Scenario::Sc3);
    let sol = solve(&forest, &params).unwrap();
    let ora = oracle::solve_forest(&forest, &params);

    let total: f64 = sol.trees.iter().map(|t| t.inflow_ul_min).sum();
    assert!(rel(total, 80.0) < 1e-12);
    for (ti, ot) in ora.iter().enumerate() {
        assert!(rel(sol.trees[ti].inflow_ul_min, ot.inflow_ul_min) < 1e-9);
        for &(vi, qo) in &ot.outlet_q_ul_min {
            assert!(rel(sol.trees[ti].vertices[vi].q_ul_min, qo) < 1e-9);
        }
    }
}

#[test]
fn conservation_and_monotonicity_hold_on_seeded_trees() {
    for spec in &seeded_specs(4242, 20, 6) {
        let graph = generate_tree(spec).unwrap();
        let params = ScenarioParams::for_scenario(Scenario::Sc1);
        let sol = solve(&graph, &params).unwrap();
        assert!(sol.summary.max_junction_imbalance_rel < 1e-10);
        assert!(sol.summary.inflow_rel_error < 1e-12);
        assert!(sol.summary.residual_rel < 1e-10);

        // Pressure never increases away from the root, pixel by pixel.
        let (tree, tsol) = (&graph.trees[0], &sol.trees[0]);
        for (ei, e) in tree.edges.iter().enumerate() {
            let up_p = tsol.vertices[e.from].p_mmhg;
            let ps = &tsol.edges[ei].pixels;
            assert!(ps[0].p_mmhg <= up_p + 1e-12 * params.p0_mmhg);
            for w in ps.windows(2) {
                assert!(w[1].p_mmhg <= w[0].p_mmhg);
            }
            assert!(ps.last().unwrap().p_mmhg > 0.0, "pressure stayed positive");
        }
    }
}

#[test]
fn drops_scale_linearly_with_total_flow() {
    for spec in &seeded_specs(55, 5, 5) {
        let graph = generate_tree(spec).unwrap();
        let lo = solve(&graph, &ScenarioParams::with_total_flow(30.0)).unwrap();
        let hi = solve(&graph, &ScenarioParams::with_total_flow(60.0)).unwrap();
        for (tl, th) in lo.trees.iter().zip(&hi.trees) {
            for (el, eh) in tl.edges.iter().zip(&th.edges) {
                assert!(rel(eh.q_ul_min, 2.0 * el.q_ul_min) < 1e-9);
                for (pl, ph) in el.pixels.iter().zip(&eh.pixels) {
                    let dl = 62.22 - pl.p_mmhg;
                    let dh = 62.22 - ph.p_mmhg;
                    if dl > 1e-12 {
                        assert!(rel(dh, 2.0 * dl) < 1e-9, "{dh} vs 2x{dl}");
                    }
                }
            }
        }
    }
}

//! End-to-end round trips: synthetic trees through rasterization and
//! re-extraction, and every file format through write/read cycles.

use fundusflow::extract::extract_graph;
use fundusflow::features::summarize;
use fundusflow::graph::CenterlineGraph;
use fundusflow::hemo::{assemble_and_solve, Scenario, ScenarioParams};
use fundusflow::io;
use fundusflow::synth::{generate_tree, rasterize, SynthSpec};

const PITCH_CM: f64 = 6.0e-4;

fn spec(depth: usize, root_um: f64, asymmetry: f64, segment_px: usize) -> SynthSpec<f64> {
    let mut s = SynthSpec::new(depth);
    s.root_radius_cm = root_um * 1e-4;
    s.asymmetry = asymmetry;
    s.segment_px = segment_px;
    s
}

/// Drawing a tree as disc-swept strokes and re-extracting it must give back
/// the same topology, with the optic disc eating only part of the root
/// stroke.
#[test]
fn rasterized_trees_reextract_with_identical_topology() {
    let cases = [
        spec(1, 20.0, 1.0, 10),
        spec(2, 25.0, 0.9, 8),
        spec(3, 30.0, 0.8, 9),
        spec(4, 40.0, 0.85, 8),
        spec(5, 60.0, 0.9, 12),
    ];
    for (i, sp) in cases.iter().enumerate() {
        let truth = generate_tree(sp).expect("generate");
        let mask = rasterize(&truth, 3.0).expect("rasterize");
        let found = extract_graph(&mask).expect("extract");

        assert_eq!(found.trees.len(), 1, "case {i}: tree count");
        assert_eq!(
            found.n_bifurcations(),
            truth.n_bifurcations(),
            "case {i}: bifurcation count"
        );
        assert_eq!(
            found.n_terminals(),
            truth.n_terminals(),
            "case {i}: terminal count"
        );
        assert_eq!(found.n_edges(), truth.n_edges(), "case {i}: edge count");
    }
}

/// The widest extracted radius must agree with the drawn root radius to
/// within one pixel pitch (raster quantization).
#[test]
fn extracted_radii_track_the_drawn_strokes() {
    let sp = spec(3, 36.0, 0.9, 10);
    let truth = generate_tree(&sp).expect("generate");
    let mask = rasterize(&truth, 3.0).expect("rasterize");
    let found = extract_graph(&mask).expect("extract");

    let mut max_r: f64 = 0.0;
    let mut min_r = f64::INFINITY;
    for tree in &found.trees {
        for e in &tree.edges {
            for p in &e.pixels {
                max_r = max_r.max(p.radius_cm);
                min_r = min_r.min(p.radius_cm);
            }
        }
    }
    // The distance transform measures to the nearest background pixel
    // *center*, so the recovered radius may exceed the drawn one by up to
    // one full pitch; the epsilon absorbs binary rounding of the bound.
    let root_r = sp.root_radius_cm;
    assert!(
        (max_r - root_r).abs() <= PITCH_CM * (1.0 + 1e-9),
        "root radius {root_r} vs widest extracted {max_r}"
    );
    let leaf_r = sp.min_leaf_radius_cm();
    assert!(
        min_r >= leaf_r - PITCH_CM && min_r <= root_r,
        "narrowest extracted radius {min_r} vs thinnest drawn {leaf_r}"
    );
}

/// Solving a re-extracted (not synthetic-exact) graph must still satisfy
/// all conservation contracts, and pressure must fall along every edge.
#[test]
fn extracted_graphs_solve_cleanly() {
    let sp = spec(4, 40.0, 0.85, 8);
    let truth = generate_tree(&sp).expect("generate");
    let mask = rasterize(&truth, 3.0).expect("rasterize");
    let graph = extract_graph(&mask).expect("extract");
    let params = ScenarioParams::for_scenario(Scenario::Sc2);
    let solution = assemble_and_solve(&graph, &params).expect("solve");

    let s = &solution.summary;
    assert!(s.residual_rel <= 1e-10, "residual {}", s.residual_rel);
    assert!(s.inflow_rel_error <= 1e-12, "inflow {}", s.inflow_rel_error);
    assert!(
        s.max_junction_imbalance_rel <= 1e-10,
        "imbalance {}",
        s.max_junction_imbalance_rel
    );
    for tsol in &solution.trees {
        for esol in &tsol.edges {
            for w in esol.pixels.windows(2) {
                assert!(
                    w[1].p_mmhg <= w[0].p_mmhg + 1e-12,
                    "pressure rose along an edge"
                );
            }
        }
    }
}

/// The full file pipeline — mask PNG + OD JSON in, graph JSON, solution
/// CSV, features JSON out — reproduces the in-memory results and writes
/// byte-identical files when repeated.
#[test]
fn file_pipeline_matches_in_memory_pipeline() {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let sp = spec(3, 30.0, 0.8, 9);
    let truth = generate_tree(&sp).expect("generate");
    let mask = rasterize(&truth, 3.0).expect("rasterize");

    // Stage 1: persist the inputs and load them back.
    let mask_path = d.join("subject.png");
    let od_path = d.join("subject.od.json");
    io::write_mask_png(&mask_path, &mask.grid).unwrap();
    io::write_od_json(&od_path, &mask.od_ellipse).unwrap();
    let loaded = io::read_artery_mask::<f64>(&mask_path, &od_path, 6.0).unwrap();
    assert_eq!(loaded.grid.fg_pixels(), mask.grid.fg_pixels());

    // Stage 2: extract and persist the graph.
    let graph = extract_graph(&loaded).expect("extract");
    let graph_path = d.join("subject.graph.json");
    io::write_graph_json(&graph_path, &graph).unwrap();
    let graph_bytes = std::fs::read(&graph_path).unwrap();
    let graph2: CenterlineGraph<f64> = io::read_graph_json(&graph_path).unwrap();
    io::write_graph_json(&graph_path, &graph2).unwrap();
    assert_eq!(
        graph_bytes,
        std::fs::read(&graph_path).unwrap(),
        "graph file changes across a load/store cycle"
    );

    // Stage 3: solve the *loaded* graph and persist the solution.
    let params = ScenarioParams::for_scenario(Scenario::Sc2);
    let solution = assemble_and_solve(&graph2, &params).expect("solve");
    let sol_path = d.join("subject.solution.csv");
    let sum_path = d.join("subject.summary.json");
    io::write_solution_csv(&sol_path, &graph2, &solution).unwrap();
    io::write_summary_json(&sum_path, &solution).unwrap();
    let sol_bytes = std::fs::read(&sol_path).unwrap();
    io::write_solution_csv(&sol_path, &graph2, &solution).unwrap();
    assert_eq!(sol_bytes, std::fs::read(&sol_path).unwrap());

    // Stage 4: featurize from the persisted rows and compare to memory.
    let rows = io::read_solution_csv::<f64>(&sol_path).unwrap();
    let from_disk = io::featurize_rows(&rows).unwrap();
    let in_memory = summarize(&graph2, &solution).unwrap();
    assert_eq!(from_disk.len(), in_memory.len());
    for (a, b) in in_memory.elements.iter().zip(&from_disk.elements) {
        assert_eq!((a.tree, a.kind, a.id), (b.tree, b.kind, b.id));
        for (x, y) in a.f.iter().zip(&b.f) {
            let scale = x.abs().max(1e-30);
            assert!((x - y).abs() / scale <= 1e-10, "{x} vs {y}");
        }
    }

    // Stage 5: features JSON round trip.
    let feat_path = d.join("subject.features.json");
    io::write_features_json(&feat_path, &from_disk).unwrap();
    let feat_bytes = std::fs::read(&feat_path).unwrap();
    let reloaded = io::read_features_json::<f64>(&feat_path).unwrap();
    io::write_features_json(&feat_path, &reloaded).unwrap();
    assert_eq!(feat_bytes, std::fs::read(&feat_path).unwrap());
}

/// Measurement counts persist unchanged through the file formats: the
/// element count of a subject equals its graph's segment + bifurcation +
/// terminal count at every stage.
#[test]
fn element_counts_are_stable_across_formats() {
    let dir = tempfile::tempdir().expect("tempdir");
    let d = dir.path();
    let sp = spec(2, 24.0, 1.0, 8);
    let graph = generate_tree(&sp).expect("generate");
    let expected = graph.n_edges() + graph.n_bifurcations() + graph.n_terminals();

    let params = ScenarioParams::for_scenario(Scenario::Sc1);
    let solution = assemble_and_solve(&graph, &params).expect("solve");
    let features = summarize(&graph, &solution).unwrap();
    assert_eq!(features.len(), expected);

    let sol_path = d.join("t.solution.csv");
    io::write_solution_csv(&sol_path, &graph, &solution).unwrap();
    let rows = io::read_solution_csv::<f64>(&sol_path).unwrap();
    assert_eq!(io::featurize_rows(&rows).unwrap().len(), expected);

    let feat_path = d.join("t.features.json");
    io::write_features_json(&feat_path, &features).unwrap();
    assert_eq!(
        io::read_features_json::<f64>(&feat_path).unwrap().len(),
        expected
    );
}

//! Pipeline orchestration behind the `fundusflow` binary.
//!
//! Every subcommand is a thin wrapper over a function in this library so
//! the stages can be driven and tested programmatically. Stages talk to
//! each other exclusively through files: `run` executes the same
//! read-file/write-file steps as the standalone subcommands, which makes
//! staged and end-to-end invocations produce identical bytes.

use std::fs::{self, File};
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use fundusflow::analysis::{self, label_name, Sex, SubjectInfo};
use fundusflow::extract::extract_graph;
use fundusflow::graph::CenterlineGraph;
use fundusflow::hemo::{assemble_and_solve, PixelState, Scenario, ScenarioParams};
use fundusflow::io::{self, sig12, SolutionRow};
use fundusflow::kmeans::KMeansConfig;
use fundusflow::loocv::{fit_final, loocv, CvConfig};
use fundusflow::raster::BitRaster;
use fundusflow::synth::{generate_tree, rasterize, subject_spec, SynthSpec};
use fundusflow::{Error, FeatureSet64, Result};

/// Environment variable naming the default dataset directory.
pub const DATA_DIR_ENV: &str = "FUNDUSFLOW_DATA";

/// Fixed five-stop colormap used by `render` (position, RGB). Field values
/// are min-max normalized onto [0, 1] and interpolated linearly between
/// stops; a constant field maps to the middle stop.
pub const COLORMAP: [(f64, [u8; 3]); 5] = [
    (0.0, [12, 8, 135]),
    (0.25, [126, 3, 168]),
    (0.5, [204, 71, 120]),
    (0.75, [248, 149, 64]),
    (1.0, [250, 249, 33]),
];

/// Gray used for artery-mask pixels under the colored centerline.
pub const MASK_GRAY: [u8; 3] = [70, 70, 70];

pub fn colormap(t: f64) -> [u8; 3] {
    let t = t.clamp(0.0, 1.0);
    let mut lo = COLORMAP[0];
    for hi in COLORMAP.iter().skip(1) {
        if t <= hi.0 {
            let span = hi.0 - lo.0;
            let u = if span > 0.0 { (t - lo.0) / span } else { 0.0 };
            let mut rgb = [0u8; 3];
            for (v, (&a, &b)) in rgb.iter_mut().zip(lo.1.iter().zip(&hi.1)) {
                *v = (a as f64 + u * (b as f64 - a as f64)).round() as u8;
            }
            return rgb;
        }
        lo = *hi;
    }
    COLORMAP[4].1
}

// ---------------------------------------------------------------------------
// Configuration
// ---------------------------------------------------------------------------

/// Run-wide configuration, loadable from TOML with per-flag overrides.
#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    /// Dataset root: `labels.csv`, `masks/<id>.png`, `od/<id>.json`.
    pub data_dir: Option<PathBuf>,
    pub out_dir: PathBuf,
    /// Named scenario (`sc1`, `sc2`, `sc3`) picking the total flow.
    pub scenario: String,
    /// Total-flow override in ul/min (takes precedence over `scenario`).
    pub qt_ul_min: Option<f64>,
    /// Inlet-pressure override in mmHg.
    pub p0_mmhg: Option<f64>,
    /// Murray-exponent override.
    pub gamma: Option<f64>,
    pub pixel_pitch_um: f64,
    pub seed: u64,
    /// Worker threads for per-subject stages; 0 means one per core.
    pub jobs: usize,
    pub k_grid: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    pub permutations: usize,
    pub kmeans_restarts: usize,
    pub kmeans_max_iter: usize,
    /// When set, render an overlay of this field per subject.
    pub render_field: Option<String>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        let std_cfg: CvConfig<f64> = CvConfig::standard(0);
        PipelineConfig {
            data_dir: None,
            out_dir: PathBuf::from("out"),
            scenario: "sc2".into(),
            qt_ul_min: None,
            p0_mmhg: None,
            gamma: None,
            pixel_pitch_um: 6.0,
            seed: 2024,
            jobs: 0,
            k_grid: std_cfg.k_grid,
            lambda_grid: std_cfg.lambda_grid,
            permutations: 0,
            kmeans_restarts: KMeansConfig::default().restarts,
            kmeans_max_iter: KMeansConfig::default().max_iter,
            render_field: None,
        }
    }
}

/// Flag-level overrides applied on top of a config file.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub data_dir: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub scenario: Option<String>,
    pub qt_ul_min: Option<f64>,
    pub p0_mmhg: Option<f64>,
    pub gamma: Option<f64>,
    pub pixel_pitch_um: Option<f64>,
    pub seed: Option<u64>,
    pub jobs: Option<usize>,
    pub k_grid: Option<Vec<usize>>,
    pub lambda_grid: Option<Vec<f64>>,
    pub permutations: Option<usize>,
    pub render_field: Option<String>,
}

/// Load the config file (if any), apply overrides, then fall back to the
/// `FUNDUSFLOW_DATA` environment variable for the dataset directory.
pub fn load_config(path: Option<&Path>, ov: &Overrides) -> Result<PipelineConfig> {
    let mut cfg = match path {
        Some(p) => {
            let text = fs::read_to_string(p)?;
            toml::from_str(&text)
                .map_err(|e| Error::format(p.display().to_string(), e.to_string()))?
        }
        None => PipelineConfig::default(),
    };
    if let Some(v) = &ov.data_dir {
        cfg.data_dir = Some(v.clone());
    }
    if let Some(v) = &ov.out_dir {
        cfg.out_dir = v.clone();
    }
    if let Some(v) = &ov.scenario {
        cfg.scenario = v.clone();
    }
    if let Some(v) = ov.qt_ul_min {
        cfg.qt_ul_min = Some(v);
    }
    if let Some(v) = ov.p0_mmhg {
        cfg.p0_mmhg = Some(v);
    }
    if let Some(v) = ov.gamma {
        cfg.gamma = Some(v);
    }
    if let Some(v) = ov.pixel_pitch_um {
        cfg.pixel_pitch_um = v;
    }
    if let Some(v) = ov.seed {
        cfg.seed = v;
    }
    if let Some(v) = ov.jobs {
        cfg.jobs = v;
    }
    if let Some(v) = &ov.k_grid {
        cfg.k_grid = v.clone();
    }
    if let Some(v) = &ov.lambda_grid {
        cfg.lambda_grid = v.clone();
    }
    if let Some(v) = ov.permutations {
        cfg.permutations = v;
    }
    if let Some(v) = &ov.render_field {
        cfg.render_field = Some(v.clone());
    }
    if cfg.data_dir.is_none() {
        cfg.data_dir = std::env::var_os(DATA_DIR_ENV).map(PathBuf::from);
    }
    Ok(cfg)
}

impl PipelineConfig {
    /// Resolve the physical parameters of this run.
    pub fn scenario_params(&self) -> Result<ScenarioParams<f64>> {
        resolve_params(
            Some(&self.scenario),
            self.qt_ul_min,
            self.p0_mmhg,
            self.gamma,
        )
    }

    pub fn cv_config(&self) -> CvConfig<f64> {
        CvConfig {
            k_grid: self.k_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            kmeans: KMeansConfig {
                restarts: self.kmeans_restarts,
                max_iter: self.kmeans_max_iter,
            },
            seed: self.seed,
            n_permutations: self.permutations,
        }
    }
}

/// Build scenario parameters from a scenario name plus optional overrides.
pub fn resolve_params(
    scenario: Option<&str>,
    qt: Option<f64>,
    p0: Option<f64>,
    gamma: Option<f64>,
) -> Result<ScenarioParams<f64>> {
    let base: Scenario = scenario
        .unwrap_or("sc2")
        .parse()
        .map_err(Error::InvalidField)?;
    let mut params = ScenarioParams::for_scenario(base);
    if let Some(v) = qt {
        params.qt_ul_min = v;
    }
    if let Some(v) = p0 {
        params.p0_mmhg = v;
    }
    if let Some(v) = gamma {
        params.gamma = v;
    }
    params.validate()?;
    Ok(params)
}

// ---------------------------------------------------------------------------
// Per-subject stages
// ---------------------------------------------------------------------------

/// Counts reported by `extract-graph`.
#[derive(Debug, Clone, Copy)]
pub struct GraphStats {
    pub n_trees: usize,
    pub n_edges: usize,
    pub n_bifurcations: usize,
    pub n_terminals: usize,
}

pub fn cmd_extract(mask: &Path, od: &Path, pitch_um: f64, out: &Path) -> Result<GraphStats> {
    let mask = io::read_artery_mask::<f64>(mask, od, pitch_um)?;
    let graph = extract_graph(&mask)?;
    ensure_parent(out)?;
    io::write_graph_json(out, &graph)?;
    Ok(GraphStats {
        n_trees: graph.trees.len(),
        n_edges: graph.n_edges(),
        n_bifurcations: graph.n_bifurcations(),
        n_terminals: graph.n_terminals(),
    })
}

/// Headline numbers reported by `simulate`.
#[derive(Debug, Clone, Copy)]
pub struct SimStats {
    pub n_inlets: usize,
    pub n_outlets: usize,
    pub total_inflow_ul_min: f64,
    pub residual_rel: f64,
}

pub fn cmd_simulate(
    graph_path: &Path,
    params: &ScenarioParams<f64>,
    out_csv: &Path,
    out_summary: Option<&Path>,
) -> Result<SimStats> {
    let graph: CenterlineGraph<f64> = io::read_graph_json(graph_path)?;
    let solution = assemble_and_solve(&graph, params)?;
    ensure_parent(out_csv)?;
    io::write_solution_csv(out_csv, &graph, &solution)?;
    if let Some(p) = out_summary {
        ensure_parent(p)?;
        io::write_summary_json(p, &solution)?;
    }
    let s = &solution.summary;
    Ok(SimStats {
        n_inlets: s.n_inlets,
        n_outlets: s.n_outlets,
        total_inflow_ul_min: s.total_inflow_ul_min,
        residual_rel: s.residual_rel,
    })
}

/// Returns the number of feature elements written.
pub fn cmd_featurize(solution: &Path, out: &Path) -> Result<usize> {
    let rows: Vec<SolutionRow<f64>> = io::read_solution_csv(solution)?;
    let features = io::featurize_rows(&rows)?;
    ensure_parent(out)?;
    io::write_features_json(out, &features)?;
    Ok(features.len())
}

// ---------------------------------------------------------------------------
// Cohort stages
// ---------------------------------------------------------------------------

fn features_path(dir: &Path, id: &str) -> PathBuf {
    dir.join(format!("{id}.features.json"))
}

fn load_cohort(
    features_dir: &Path,
    labels_path: &Path,
) -> Result<(Vec<SubjectInfo>, Vec<FeatureSet64>)> {
    let subjects = io::read_labels_csv(labels_path)?;
    let mut features = Vec::with_capacity(subjects.len());
    for s in &subjects {
        features.push(io::read_features_json(&features_path(features_dir, &s.id))?);
    }
    Ok((subjects, features))
}

/// Headline numbers reported by `evaluate`.
#[derive(Debug, Clone, Copy)]
pub struct EvalStats {
    pub n_subjects: usize,
    pub auc: f64,
    pub accuracy: f64,
    pub k_final: usize,
    pub lambda_final: f64,
}

pub fn cmd_evaluate(
    features_dir: &Path,
    labels_path: &Path,
    cv: &CvConfig<f64>,
    out_metrics: &Path,
    out_model: &Path,
) -> Result<EvalStats> {
    let (subjects, features) = load_cohort(features_dir, labels_path)?;
    let labels: Vec<i8> = subjects.iter().map(|s| s.label).collect();
    let ids: Vec<String> = subjects.iter().map(|s| s.id.clone()).collect();

    let report = loocv(&features, &labels, cv)?;
    let (k_final, lambda_final, model) = fit_final(&features, &labels, cv)?;

    ensure_parent(out_metrics)?;
    io::write_metrics_json(out_metrics, &report, &ids)?;
    ensure_parent(out_model)?;
    io::write_model_json(out_model, &model)?;
    Ok(EvalStats {
        n_subjects: subjects.len(),
        auc: report.auc,
        accuracy: report.accuracy,
        k_final,
        lambda_final,
    })
}

#[derive(Serialize)]
struct FitDto {
    group: String,
    n_segments: usize,
    a: f64,
    b: f64,
}

#[derive(Serialize)]
struct SubjectRowDto {
    subject_id: String,
    group: String,
    n_segments: usize,
    n_bifurcations: usize,
    n_terminals: usize,
    n_elements: usize,
    age: Option<f64>,
    sex: Option<String>,
    mean_dp_mmhg: f64,
}

#[derive(Serialize)]
struct DemographicsDto {
    group: String,
    n_subjects: usize,
    age_mean: Option<f64>,
    age_std: Option<f64>,
    n_male: usize,
    n_female: usize,
}

#[derive(Serialize)]
struct MeasurementsDto {
    group: String,
    n_measurements: usize,
    dp_mmhg_mean: f64,
    dp_mmhg_std: f64,
    v_cm_s_mean: f64,
    v_cm_s_std: f64,
}

#[derive(Serialize)]
struct AnalysisDto {
    p0_mmhg: f64,
    n_subjects: usize,
    n_segments: usize,
    spearman_rho_radius_flow: f64,
    fits: Vec<FitDto>,
    per_subject: Vec<SubjectRowDto>,
    demographics: Vec<DemographicsDto>,
    measurements: Vec<MeasurementsDto>,
}

/// Headline numbers reported by `analyze`.
#[derive(Debug, Clone, Copy)]
pub struct AnalyzeStats {
    pub n_subjects: usize,
    pub n_segments: usize,
    pub spearman_rho: f64,
}

const FIT_SAMPLES: usize = 100;

fn group_of(label: Option<i8>) -> String {
    match label {
        Some(l) => label_name(l).to_string(),
        None => "all".to_string(),
    }
}

/// Radius-flow correlation, exponential fits, and the two cohort tables.
/// Writes `summary.json` and a `segments.csv` plot-data file into
/// `out_dir`.
pub fn cmd_analyze(
    features_dir: &Path,
    labels_path: &Path,
    p0_mmhg: f64,
    out_dir: &Path,
) -> Result<AnalyzeStats> {
    let (subjects, features) = load_cohort(features_dir, labels_path)?;
    let records = analysis::measurements(&subjects, &features)?;
    let segments: Vec<&analysis::MeasurementRecord<f64>> = records
        .iter()
        .filter(|r| r.kind == fundusflow::graph::GraphElementKind::Segment)
        .collect();
    if segments.len() < 3 {
        return Err(Error::InsufficientData(format!(
            "radius-flow correlation needs at least 3 segments, found {}",
            segments.len()
        )));
    }
    let radii: Vec<f64> = segments.iter().map(|r| r.radius_cm).collect();
    let flows: Vec<f64> = segments.iter().map(|r| r.f[0]).collect();
    let rho = analysis::spearman(&radii, &flows)?;

    let mut fits = Vec::new();
    let mut fit_rows: Vec<(String, f64, f64)> = Vec::new();
    for group in [Some(-1i8), Some(1), None] {
        let (gr, gq): (Vec<f64>, Vec<f64>) = segments
            .iter()
            .filter(|r| group.map(|g| g == r.label).unwrap_or(true))
            .map(|r| (r.radius_cm, r.f[0]))
            .unzip();
        if gr.len() < 2 {
            return Err(Error::EmptyGroup(format!(
                "group {} has too few segments to fit",
                group_of(group)
            )));
        }
        let fit = analysis::fit_exponential(&gr, &gq)?;
        fits.push(FitDto {
            group: group_of(group),
            n_segments: gr.len(),
            a: sig12(fit.a),
            b: sig12(fit.b),
        });
        let (lo, hi) = gr
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &r| {
                (lo.min(r), hi.max(r))
            });
        for i in 0..FIT_SAMPLES {
            let r = lo + (hi - lo) * i as f64 / (FIT_SAMPLES - 1) as f64;
            fit_rows.push((group_of(group), r, fit.a * (fit.b * r).exp()));
        }
    }

    let tables = analysis::cohort_summary(&subjects, &features, p0_mmhg)?;

    fs::create_dir_all(out_dir)?;
    let dto = AnalysisDto {
        p0_mmhg: sig12(p0_mmhg),
        n_subjects: subjects.len(),
        n_segments: segments.len(),
        spearman_rho_radius_flow: sig12(rho),
        fits,
        per_subject: tables
            .subjects
            .iter()
            .map(|s| SubjectRowDto {
                subject_id: s.subject_id.clone(),
                group: label_name(s.label).to_string(),
                n_segments: s.n_segments,
                n_bifurcations: s.n_bifurcations,
                n_terminals: s.n_terminals,
                n_elements: s.n_segments + s.n_bifurcations + s.n_terminals,
                age: s.age.map(sig12),
                sex: s.sex.map(|x| x.as_str().to_string()),
                mean_dp_mmhg: sig12(s.mean_dp_mmhg),
            })
            .collect(),
        demographics: tables
            .demographics
            .iter()
            .map(|d| DemographicsDto {
                group: label_name(d.label).to_string(),
                n_subjects: d.n_subjects,
                age_mean: d.age.map(|a| sig12(a.mean)),
                age_std: d.age.map(|a| sig12(a.std)),
                n_male: d.n_male,
                n_female: d.n_female,
            })
            .collect(),
        measurements: tables
            .measurements
            .iter()
            .map(|m| MeasurementsDto {
                group: group_of(m.label),
                n_measurements: m.n_measurements,
                dp_mmhg_mean: sig12(m.dp_mmhg.mean),
                dp_mmhg_std: sig12(m.dp_mmhg.std),
                v_cm_s_mean: sig12(m.v_cm_s.mean),
                v_cm_s_std: sig12(m.v_cm_s.std),
            })
            .collect(),
    };
    io::write_json_pretty(&out_dir.join("summary.json"), &dto)?;

    // Plot data: measured (radius, flow) points per segment, then sampled
    // fitted curves, tagged by series and group.
    let seg_path = out_dir.join("segments.csv");
    let mut w = csv::Writer::from_writer(std::io::BufWriter::new(File::create(&seg_path)?));
    let werr = |e: csv::Error| Error::format(seg_path.display().to_string(), e.to_string());
    w.write_record(["series", "group", "subject_id", "radius_cm", "q_ul_min"])
        .map_err(werr)?;
    for r in &segments {
        w.write_record([
            "point".to_string(),
            label_name(r.label).to_string(),
            r.subject_id.clone(),
            io::fmt_sig12(r.radius_cm),
            io::fmt_sig12(r.f[0]),
        ])
        .map_err(werr)?;
    }
    for (group, r, q) in &fit_rows {
        w.write_record([
            "fit".to_string(),
            group.clone(),
            String::new(),
            io::fmt_sig12(*r),
            io::fmt_sig12(*q),
        ])
        .map_err(werr)?;
    }
    w.flush()?;

    Ok(AnalyzeStats {
        n_subjects: subjects.len(),
        n_segments: segments.len(),
        spearman_rho: rho,
    })
}

// ---------------------------------------------------------------------------
// Synthetic datasets
// ---------------------------------------------------------------------------

/// Options for `synth`: writes a complete dataset (masks, annotations,
/// labels) under `out_dir`.
#[derive(Debug, Clone)]
pub struct SynthOptions {
    pub out_dir: PathBuf,
    pub n_per_class: usize,
    pub depth: usize,
    pub root_radius_um: f64,
    pub asymmetry: f64,
    pub segment_px: usize,
    pub od_radius_px: f64,
    pub seed: u64,
}

impl Default for SynthOptions {
    fn default() -> Self {
        SynthOptions {
            out_dir: PathBuf::from("synth-data"),
            n_per_class: 5,
            depth: 3,
            root_radius_um: 40.0,
            asymmetry: 0.85,
            segment_px: 8,
            od_radius_px: 3.0,
            seed: 2024,
        }
    }
}

/// Generate a synthetic two-class dataset in the layout `run` consumes.
/// Returns the subject ids in labels order.
pub fn cmd_synth(opt: &SynthOptions) -> Result<Vec<String>> {
    if opt.n_per_class == 0 {
        return Err(Error::EmptyGroup("n_per_class must be positive".into()));
    }
    let mut base: SynthSpec<f64> = SynthSpec::new(opt.depth);
    base.root_radius_cm = opt.root_radius_um * 1e-4;
    base.asymmetry = opt.asymmetry;
    base.segment_px = opt.segment_px;
    base.validate()?;

    let masks = opt.out_dir.join("masks");
    let ods = opt.out_dir.join("od");
    fs::create_dir_all(&masks)?;
    fs::create_dir_all(&ods)?;

    let mut subjects = Vec::new();
    for class in 0..2usize {
        for i in 0..opt.n_per_class {
            let index = class * opt.n_per_class + i;
            let id = format!("synth-c{class}-{i:03}");
            let spec = subject_spec(&base, opt.seed, index);
            let graph = generate_tree(&spec)?;
            let mask = rasterize(&graph, opt.od_radius_px)?;
            io::write_mask_png(&masks.join(format!("{id}.png")), &mask.grid)?;
            io::write_od_json(&ods.join(format!("{id}.json")), &mask.od_ellipse)?;
            subjects.push(SubjectInfo {
                id,
                label: if class == 0 { -1 } else { 1 },
                // Deterministic cover demographics so the cohort tables
                // have something to aggregate.
                age: Some(50.0 + ((index * 7) % 30) as f64),
                sex: Some(if index % 2 == 0 {
                    Sex::Female
                } else {
                    Sex::Male
                }),
            });
        }
    }
    io::write_labels_csv(&opt.out_dir.join("labels.csv"), &subjects)?;
    Ok(subjects.into_iter().map(|s| s.id).collect())
}

// ---------------------------------------------------------------------------
// Rendering
// ---------------------------------------------------------------------------

fn field_extractor(field: &str) -> Result<fn(&PixelState<f64>) -> f64> {
    Ok(match field.to_ascii_lowercase().as_str() {
        "p" => |s: &PixelState<f64>| s.p_mmhg,
        "q" => |s: &PixelState<f64>| s.q_ul_min,
        "v" => |s: &PixelState<f64>| s.v_cm_s,
        "r" => |s: &PixelState<f64>| s.r_mmhg_min_ul,
        "re" => |s: &PixelState<f64>| s.reynolds,
        "wss" => |s: &PixelState<f64>| s.wss_dyn_cm2,
        other => {
            return Err(Error::InvalidField(format!(
                "unknown render field '{other}' (expected p, q, v, r, re, or wss)"
            )))
        }
    })
}

/// Paint solution values over the mask. Returns a row-major RGB buffer
/// with the mask's dimensions.
pub fn render_overlay(
    grid: &BitRaster,
    rows: &[SolutionRow<f64>],
    field: &str,
) -> Result<Vec<[u8; 3]>> {
    let get = field_extractor(field)?;
    let (h, w) = (grid.rows(), grid.cols());
    let mut canvas = vec![[0u8; 3]; h * w];
    for r in 0..h {
        for c in 0..w {
            if grid.get(r as i64, c as i64) {
                canvas[r * w + c] = MASK_GRAY;
            }
        }
    }
    let mut lo = f64::INFINITY;
    let mut hi = f64::NEG_INFINITY;
    for row in rows {
        let v = get(&row.state);
        lo = lo.min(v);
        hi = hi.max(v);
    }
    for row in rows {
        let (r, c) = (row.row as usize, row.col as usize);
        if r >= h || c >= w {
            return Err(Error::InvalidField(format!(
                "solution pixel ({r}, {c}) lies outside the {h} x {w} mask"
            )));
        }
        let t = if hi > lo {
            (get(&row.state) - lo) / (hi - lo)
        } else {
            0.5
        };
        canvas[r * w + c] = colormap(t);
    }
    Ok(canvas)
}

pub fn cmd_render(mask: &Path, solution: &Path, field: &str, out: &Path) -> Result<()> {
    let grid = io::read_mask_png(mask)?;
    let rows: Vec<SolutionRow<f64>> = io::read_solution_csv(solution)?;
    let canvas = render_overlay(&grid, &rows, field)?;
    ensure_parent(out)?;
    io::write_rgb_png(out, grid.rows(), grid.cols(), &canvas)
}

// ---------------------------------------------------------------------------
// Full pipeline
// ---------------------------------------------------------------------------

/// What `run` produced, for reporting and the run manifest.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub n_subjects: usize,
    /// Per-subject stage failures as `(subject_id, message)`.
    pub failures: Vec<(String, String)>,
    pub eval: Option<EvalStats>,
    pub analyze: Option<AnalyzeStats>,
    /// Message of the cohort-stage failure, if the cohort stages could not
    /// run (e.g. too few surviving subjects).
    pub cohort_error: Option<String>,
}

impl RunOutcome {
    pub fn is_success(&self) -> bool {
        self.failures.is_empty() && self.cohort_error.is_none()
    }
}

#[derive(Serialize)]
struct RunManifest {
    scenario: ScenarioParams<f64>,
    seed: u64,
    n_subjects: usize,
    n_failed: usize,
    auc: Option<f64>,
    accuracy: Option<f64>,
    spearman_rho_radius_flow: Option<f64>,
}

fn ensure_parent(path: &Path) -> Result<()> {
    if let Some(dir) = path.parent() {
        if !dir.as_os_str().is_empty() {
            fs::create_dir_all(dir)?;
        }
    }
    Ok(())
}

/// Execute every stage over a dataset directory.
///
/// Subject stages run in a bounded worker pool and never abort the run;
/// their failures are collected into the outcome. Cohort stages (evaluate,
/// analyze) run afterwards over the subjects that survived.
pub fn run_pipeline(cfg: &PipelineConfig) -> Result<RunOutcome> {
    let data_dir = cfg.data_dir.clone().ok_or_else(|| {
        Error::InvalidField(format!(
            "no dataset directory: pass --data-dir, set data_dir in the \
             config, or export {DATA_DIR_ENV}"
        ))
    })?;
    let params = cfg.scenario_params()?;
    let subjects = io::read_labels_csv(&data_dir.join("labels.csv"))?;

    let out = &cfg.out_dir;
    for sub in ["graphs", "solutions", "features"] {
        fs::create_dir_all(out.join(sub))?;
    }

    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidField(format!("worker pool: {e}")))?;

    let render_field = cfg.render_field.clone();
    if render_field.is_some() {
        fs::create_dir_all(out.join("renders"))?;
    }
    let per_subject = |s: &SubjectInfo| -> Result<()> {
        let id = &s.id;
        let mask_path = data_dir.join("masks").join(format!("{id}.png"));
        let od_path = data_dir.join("od").join(format!("{id}.json"));
        let graph_path = out.join("graphs").join(format!("{id}.graph.json"));
        cmd_extract(&mask_path, &od_path, cfg.pixel_pitch_um, &graph_path)?;

        let sol_path = out.join("solutions").join(format!("{id}.solution.csv"));
        let sum_path = out.join("solutions").join(format!("{id}.summary.json"));
        cmd_simulate(&graph_path, &params, &sol_path, Some(&sum_path))?;

        let feat_path = features_path(&out.join("features"), id);
        cmd_featurize(&sol_path, &feat_path)?;

        if let Some(field) = &render_field {
            let png = out.join("renders").join(format!("{id}.{field}.png"));
            cmd_render(&mask_path, &sol_path, field, &png)?;
        }
        Ok(())
    };

    let results: Vec<Result<()>> = pool.install(|| subjects.par_iter().map(per_subject).collect());
    let mut failures = Vec::new();
    let mut survivors = Vec::new();
    for (s, r) in subjects.iter().zip(results) {
        match r {
            Ok(()) => survivors.push(s.clone()),
            Err(e) => failures.push((s.id.clone(), e.to_string())),
        }
    }

    // Cohort stages over the survivors, against a filtered labels file so
    // the staged commands see a consistent dataset.
    let mut eval = None;
    let mut analyze = None;
    let mut cohort_error = None;
    if survivors.is_empty() {
        cohort_error = Some("no subject survived the per-subject stages".to_string());
    } else {
        let labels_path = out.join("labels.csv");
        io::write_labels_csv(&labels_path, &survivors)?;
        let features_dir = out.join("features");
        let cohort = (|| -> Result<(EvalStats, AnalyzeStats)> {
            let e = cmd_evaluate(
                &features_dir,
                &labels_path,
                &cfg.cv_config(),
                &out.join("evaluation").join("metrics.json"),
                &out.join("evaluation").join("model.json"),
            )?;
            let a = cmd_analyze(
                &features_dir,
                &labels_path,
                params.p0_mmhg,
                &out.join("analysis"),
            )?;
            Ok((e, a))
        })();
        match cohort {
            Ok((e, a)) => {
                eval = Some(e);
                analyze = Some(a);
            }
            Err(e) => cohort_error = Some(e.to_string()),
        }
    }

    let manifest = RunManifest {
        scenario: io::params_dto(&params),
        seed: cfg.seed,
        n_subjects: subjects.len(),
        n_failed: failures.len(),
        auc: eval.map(|e| sig12(e.auc)),
        accuracy: eval.map(|e| sig12(e.accuracy)),
        spearman_rho_radius_flow: analyze.map(|a| sig12(a.spearman_rho)),
    };
    io::write_json_pretty(&out.join("run.json"), &manifest)?;

    Ok(RunOutcome {
        n_subjects: subjects.len(),
        failures,
        eval,
        analyze,
        cohort_error,
    })
}

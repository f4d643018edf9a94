//! `fundusflow` — retinal arterial hemodynamics from fundus artery masks.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use fundusflow::io::fmt_sig12;
use fundusflow_cli as cli;

#[derive(Parser)]
#[command(
    name = "fundusflow",
    about = "Reconstruct retinal arterial trees, simulate blood flow, and \
             classify glaucoma from hemodynamic features",
    version
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Args, Debug, Default)]
struct CommonFlags {
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Dataset directory (labels.csv, masks/, od/).
    #[arg(long, global = true)]
    data_dir: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    out_dir: Option<PathBuf>,
    /// Flow scenario: sc1, sc2, or sc3.
    #[arg(long, global = true)]
    scenario: Option<String>,
    /// Total retinal flow override, ul/min.
    #[arg(long, global = true)]
    qt: Option<f64>,
    /// Inlet pressure override, mmHg.
    #[arg(long, global = true)]
    p0: Option<f64>,
    /// Murray exponent override.
    #[arg(long, global = true)]
    gamma: Option<f64>,
    /// Physical pixel pitch, micrometers.
    #[arg(long, global = true)]
    pitch_um: Option<f64>,
    /// Base random seed.
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Worker threads (0 = one per core).
    #[arg(long, global = true)]
    jobs: Option<usize>,
    /// Comma-separated codebook sizes per class, e.g. 2,4,8.
    #[arg(long, value_delimiter = ',')]
    k_grid: Option<Vec<usize>>,
    /// Comma-separated ridge penalties, e.g. 0.01,1,100.
    #[arg(long, value_delimiter = ',')]
    lambda_grid: Option<Vec<f64>>,
    /// Number of label permutations for the null AUC distribution.
    #[arg(long, global = true)]
    permutations: Option<usize>,
    /// Also render this field per subject during `run`.
    #[arg(long, global = true)]
    render_field: Option<String>,
}

impl CommonFlags {
    fn overrides(&self) -> cli::Overrides {
        cli::Overrides {
            data_dir: self.data_dir.clone(),
            out_dir: self.out_dir.clone(),
            scenario: self.scenario.clone(),
            qt_ul_min: self.qt,
            p0_mmhg: self.p0,
            gamma: self.gamma,
            pixel_pitch_um: self.pitch_um,
            seed: self.seed,
            jobs: self.jobs,
            k_grid: self.k_grid.clone(),
            lambda_grid: self.lambda_grid.clone(),
            permutations: self.permutations,
            render_field: self.render_field.clone(),
        }
    }

    fn config(&self) -> fundusflow::Result<cli::PipelineConfig> {
        cli::load_config(self.config.as_deref(), &self.overrides())
    }
}

#[derive(Subcommand)]
enum Cmd {
    /// Reconstruct a rooted centerline graph from a mask and an
    /// optic-disc annotation.
    ExtractGraph {
        /// Binary artery mask PNG (nonzero = vessel).
        mask: PathBuf,
        /// Optic-disc ellipse JSON.
        od: PathBuf,
        /// Output graph JSON.
        out: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Solve steady flow over an extracted graph.
    Simulate {
        /// Graph JSON from extract-graph.
        graph: PathBuf,
        /// Output per-pixel solution CSV.
        out: PathBuf,
        /// Optional solution summary JSON.
        #[arg(long)]
        summary: Option<PathBuf>,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Collapse a solution into per-element feature vectors.
    Featurize {
        /// Solution CSV from simulate.
        solution: PathBuf,
        /// Output features JSON.
        out: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Leave-one-out evaluation of the glaucoma classifier.
    Evaluate {
        /// Directory of <id>.features.json files.
        features_dir: PathBuf,
        /// Cohort labels CSV.
        labels: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Radius-flow correlation, exponential fits, and cohort tables.
    Analyze {
        /// Directory of <id>.features.json files.
        features_dir: PathBuf,
        /// Cohort labels CSV.
        labels: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Generate a synthetic two-class dataset of masks and annotations.
    Synth {
        /// Dataset directory to create.
        out: PathBuf,
        /// Subjects per class.
        #[arg(long, default_value_t = 5)]
        n_per_class: usize,
        /// Bifurcation levels per tree.
        #[arg(long, default_value_t = 3)]
        depth: usize,
        /// Root vessel radius, micrometers.
        #[arg(long, default_value_t = 40.0)]
        root_radius_um: f64,
        /// Child radius asymmetry in (0.5, 1].
        #[arg(long, default_value_t = 0.85)]
        asymmetry: f64,
        /// Straight run between bifurcations, pixels.
        #[arg(long, default_value_t = 8)]
        segment_px: usize,
        /// Optic-disc radius drawn at the root, pixels.
        #[arg(long, default_value_t = 3.0)]
        od_radius_px: f64,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Paint a solved field over the artery mask as a PNG.
    Render {
        /// Binary artery mask PNG.
        mask: PathBuf,
        /// Solution CSV from simulate.
        solution: PathBuf,
        /// Field to color: p, q, v, r, re, or wss.
        field: String,
        /// Output PNG.
        out: PathBuf,
        #[command(flatten)]
        common: CommonFlags,
    },
    /// Run the full pipeline over a dataset directory.
    Run {
        #[command(flatten)]
        common: CommonFlags,
    },
}

fn dispatch(cmd: Cmd) -> fundusflow::Result<ExitCode> {
    match cmd {
        Cmd::ExtractGraph {
            mask,
            od,
            out,
            common,
        } => {
            let cfg = common.config()?;
            let st = cli::cmd_extract(&mask, &od, cfg.pixel_pitch_um, &out)?;
            println!(
                "extracted {} tree(s): {} segments, {} bifurcations, {} terminals -> {}",
                st.n_trees,
                st.n_edges,
                st.n_bifurcations,
                st.n_terminals,
                out.display()
            );
        }
        Cmd::Simulate {
            graph,
            out,
            summary,
            common,
        } => {
            let cfg = common.config()?;
            let params = cfg.scenario_params()?;
            let st = cli::cmd_simulate(&graph, &params, &out, summary.as_deref())?;
            println!(
                "solved {} inlet(s) / {} outlet(s), inflow {} ul/min, residual {} -> {}",
                st.n_inlets,
                st.n_outlets,
                fmt_sig12(st.total_inflow_ul_min),
                fmt_sig12(st.residual_rel),
                out.display()
            );
        }
        Cmd::Featurize {
            solution,
            out,
            common: _,
        } => {
            let n = cli::cmd_featurize(&solution, &out)?;
            println!("wrote {n} feature element(s) -> {}", out.display());
        }
        Cmd::Evaluate {
            features_dir,
            labels,
            common,
        } => {
            let cfg = common.config()?;
            let out = &cfg.out_dir;
            let st = cli::cmd_evaluate(
                &features_dir,
                &labels,
                &cfg.cv_config(),
                &out.join("metrics.json"),
                &out.join("model.json"),
            )?;
            println!(
                "evaluated {} subjects: accuracy {}, AUC {}, final model k={} lambda={}",
                st.n_subjects,
                fmt_sig12(st.accuracy),
                fmt_sig12(st.auc),
                st.k_final,
                fmt_sig12(st.lambda_final)
            );
        }
        Cmd::Analyze {
            features_dir,
            labels,
            common,
        } => {
            let cfg = common.config()?;
            let params = cfg.scenario_params()?;
            let st = cli::cmd_analyze(&features_dir, &labels, params.p0_mmhg, &cfg.out_dir)?;
            println!(
                "analyzed {} subjects, {} segments, radius-flow Spearman rho {}",
                st.n_subjects,
                st.n_segments,
                fmt_sig12(st.spearman_rho)
            );
        }
        Cmd::Synth {
            out,
            n_per_class,
            depth,
            root_radius_um,
            asymmetry,
            segment_px,
            od_radius_px,
            common,
        } => {
            let cfg = common.config()?;
            let opt = cli::SynthOptions {
                out_dir: out.clone(),
                n_per_class,
                depth,
                root_radius_um,
                asymmetry,
                segment_px,
                od_radius_px,
                seed: cfg.seed,
            };
            let ids = cli::cmd_synth(&opt)?;
            println!(
                "wrote {} synthetic subjects -> {}",
                ids.len(),
                out.display()
            );
        }
        Cmd::Render {
            mask,
            solution,
            field,
            out,
            common: _,
        } => {
            cli::cmd_render(&mask, &solution, &field, &out)?;
            println!("rendered {field} -> {}", out.display());
        }
        Cmd::Run { common } => {
            let cfg = common.config()?;
            let outcome = cli::run_pipeline(&cfg)?;
            for (id, msg) in &outcome.failures {
                eprintln!("subject {id} failed: {msg}");
            }
            if let Some(msg) = &outcome.cohort_error {
                eprintln!("cohort stages failed: {msg}");
            }
            if let Some(e) = outcome.eval {
                println!(
                    "evaluation: {} subjects, accuracy {}, AUC {}",
                    e.n_subjects,
                    fmt_sig12(e.accuracy),
                    fmt_sig12(e.auc)
                );
            }
            if let Some(a) = outcome.analyze {
                println!(
                    "analysis: {} segments, radius-flow Spearman rho {}",
                    a.n_segments,
                    fmt_sig12(a.spearman_rho)
                );
            }
            println!(
                "pipeline finished: {}/{} subjects ok -> {}",
                outcome.n_subjects - outcome.failures.len(),
                outcome.n_subjects,
                cfg.out_dir.display()
            );
            if !outcome.is_success() {
                return Ok(ExitCode::FAILURE);
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match dispatch(cli.cmd) {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::FAILURE
        }
    }
}

//! Command-line interface.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use serde::Serialize;

use crate::curvature::{
    dense_spectrum_oracle, hutchinson_trace, random_symmetric_operator, slq_density, smoothed_exact_density,
    trapezoid, SlqOptions, TraceEstimate,
};
use crate::dataset::{describe, load_dataset, prepare, synth_generate, write_dataset};
use crate::error::{Error, Result};
use crate::fsio;
use crate::graph::batch_graphs;
use crate::train::{self, csv_bytes, task_snapshot, Checkpoint, DensityDoc, TrainConfig, TRACE_HEADER};

#[derive(Debug, Parser)]
#[command(name = "gncurv", version, about = "Curvature analysis for multi-task graph networks")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Generate a synthetic coupled-target dataset.
    Synth {
        #[arg(long)]
        n: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a model and record metrics and curvature snapshots.
    Train {
        #[arg(long)]
        data: PathBuf,
        /// JSON run config; defaults apply when omitted.
        #[arg(long)]
        config: Option<PathBuf>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Trace and spectral density of one task's Hessian at a checkpoint.
    Curvature {
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        task: usize,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 100)]
        lanczos: usize,
        /// Lanczos runs; defaults to the checkpoint's setting.
        #[arg(long)]
        runs: Option<usize>,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Compare SLQ against a dense eigensolver on a random symmetric matrix.
    SpectrumDemo {
        #[arg(long, default_value_t = 1000)]
        dim: usize,
        #[arg(long, default_value_t = 100)]
        lanczos: usize,
        #[arg(long, default_value_t = 40)]
        runs: usize,
        #[arg(long, default_value_t = 500)]
        probes: usize,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        outdir: PathBuf,
    },
    /// Check dataset invariants.
    Validate {
        #[arg(long)]
        data: PathBuf,
    },
}

/// Parses `args` (including the program name), runs the command and returns
/// the process exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { 1 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(cli.command) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

fn execute(cmd: Command) -> Result<()> {
    match cmd {
        Command::Synth { n, seed, out } => {
            if n == 0 {
                return Err(Error::InvalidArgument("--n must be at least 1".into()));
            }
            write_dataset(&out, &synth_generate(n, seed))?;
            println!("wrote {n} graphs to {}", out.display());
            Ok(())
        }
        Command::Train { data, config, outdir } => {
            let cfg = match config {
                Some(path) => TrainConfig::load(&path)?,
                None => TrainConfig::default(),
            };
            let graphs = load_dataset(&data)?;
            let prepared = prepare(&graphs, &cfg.preprocess)?;
            let out = train::train(&cfg, &prepared, &outdir)?;
            println!("final train MAE per task: {:?}", out.final_train_mae());
            println!("predict-zero train MAE:   {:?}", out.baseline_train.mae);
            println!("artifacts in {}", outdir.display());
            Ok(())
        }
        Command::Curvature {
            checkpoint,
            data,
            task,
            probes,
            lanczos,
            runs,
            outdir,
        } => curvature_command(&checkpoint, &data, task, probes, lanczos, runs, &outdir),
        Command::SpectrumDemo {
            dim,
            lanczos,
            runs,
            probes,
            seed,
            outdir,
        } => {
            let report = spectrum_demo(dim, lanczos, runs, probes, seed)?;
            let path = outdir.join("spectrum.json");
            fsio::write_json_atomic(&path, &report)?;
            println!(
                "extreme relative error {:.3e}, density L1 {:.4}, trace {:.3} (exact {:.3}, stderr {:.3})",
                report.extreme_relative_error,
                report.density_l1,
                report.trace.mean,
                report.trace_exact,
                report.trace.stderr
            );
            println!("wrote {}", path.display());
            Ok(())
        }
        Command::Validate { data } => {
            let graphs = load_dataset(&data)?;
            if graphs.is_empty() {
                return Err(Error::InvalidArgument(format!("{}: no graphs", data.display())));
            }
            if let Some(g) = graphs.iter().find(|g| !g.is_symmetric()) {
                return Err(Error::InvalidGraph {
                    id: g.id.clone(),
                    reason: "edges are not symmetrized".into(),
                });
            }
            batch_graphs(&graphs)?;
            print!("{}", describe(&graphs));
            println!("ok");
            Ok(())
        }
    }
}

fn curvature_command(
    checkpoint: &Path,
    data: &Path,
    task: usize,
    probes: usize,
    lanczos: usize,
    runs: Option<usize>,
    outdir: &Path,
) -> Result<()> {
    let ck = Checkpoint::load(checkpoint)?;
    let (model, params) = ck.restore()?;
    let graphs = load_dataset(data)?;
    let prepared = prepare(&graphs, &ck.config.preprocess)?;
    if prepared.sidecar() != ck.preprocessing {
        return Err(Error::InvalidArgument(format!(
            "{} does not reproduce the preprocessing stored in {}",
            data.display(),
            checkpoint.display()
        )));
    }
    let mut cfg = ck.config.curvature.clone();
    cfg.probes = probes;
    cfg.lanczos_iterations = lanczos;
    if let Some(r) = runs {
        cfg.runs = r;
    }
    let set = train::curvature_set(&prepared.train, &cfg);
    let snap = task_snapshot(&model, &params, set, task, ck.epoch, &cfg, ck.config.seeds.probes, ck.config.execution)?;
    let trace_path = outdir.join(format!("trace_task{task}.csv"));
    fsio::write_atomic(&trace_path, &csv_bytes(&snap.traces, &TRACE_HEADER)?)?;
    let doc: &DensityDoc = &snap.densities[0];
    let density_path = outdir.join(format!("density_task{task}.json"));
    fsio::write_json_atomic(&density_path, doc)?;
    let row = &snap.traces[0];
    println!(
        "task {task} at epoch {}: trace {:.6e} ± {:.2e} over {} probes",
        ck.epoch, row.trace_mean, row.trace_stderr, row.n_samples
    );
    println!("wrote {} and {}", trace_path.display(), density_path.display());
    Ok(())
}

#[derive(Debug, Serialize)]
pub struct SpectrumReport {
    pub dim: usize,
    pub lanczos_iterations: usize,
    pub runs: usize,
    pub sigma: f64,
    pub ritz_min: f64,
    pub ritz_max: f64,
    pub dense_min: f64,
    pub dense_max: f64,
    pub extreme_relative_error: f64,
    pub density_l1: f64,
    pub trace_exact: f64,
    pub trace: TraceEstimate,
    pub dense_eigenvalues: Vec<f64>,
    pub ritz: Vec<(f64, f64)>,
    pub grid: Vec<f64>,
    pub slq_density: Vec<f64>,
    pub exact_density: Vec<f64>,
}

/// Random symmetric operator analysed by SLQ, Hutchinson and the dense
/// eigensolver side by side.
pub fn spectrum_demo(dim: usize, lanczos: usize, runs: usize, probes: usize, seed: u64) -> Result<SpectrumReport> {
    let (op, matrix) = random_symmetric_operator(dim, seed);
    let eig = dense_spectrum_oracle(dim, &matrix)?;
    let opts = SlqOptions {
        iterations: lanczos,
        runs,
        ..Default::default()
    };
    let d = slq_density(&op, &opts, sub_seed(seed, "slq"))?;
    let ritz = d.pooled_ritz();
    let ritz_min = ritz.iter().map(|r| r.0).fold(f64::INFINITY, f64::min);
    let ritz_max = ritz.iter().map(|r| r.0).fold(f64::NEG_INFINITY, f64::max);
    let (dense_min, dense_max) = (eig[0], eig[dim - 1]);
    let rel = |a: f64, b: f64| (a - b).abs() / b.abs().max(f64::MIN_POSITIVE);
    let exact = smoothed_exact_density(&eig, &d.grid, d.sigma);
    let diff: Vec<f64> = d.density.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
    let trace = hutchinson_trace(&op, probes, sub_seed(seed, "hutchinson"))?;
    Ok(SpectrumReport {
        dim,
        lanczos_iterations: lanczos,
        runs,
        sigma: d.sigma,
        ritz_min,
        ritz_max,
        dense_min,
        dense_max,
        extreme_relative_error: rel(ritz_min, dense_min).max(rel(ritz_max, dense_max)),
        density_l1: trapezoid(&d.grid, &diff),
        trace_exact: op.trace(),
        trace,
        dense_eigenvalues: eig,
        ritz,
        grid: d.grid,
        slq_density: d.density,
        exact_density: exact,
    })
}

fn sub_seed(seed: u64, label: &str) -> u64 {
    crate::seed::derive_seed(seed, label, 0)
}

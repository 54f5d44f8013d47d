use serde::{Deserialize, Serialize};

use super::config::{CurvatureConfig, TrainConfig};
use crate::autodiff::{BlockSel, ParamSet};
use crate::curvature::{
    hessian_operator, hutchinson_trace_with, slq_density, CurvatureOperator, SlqOptions, SpectralDensity,
};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::graph::{batch_graphs, Multigraph};
use crate::model::{GnModel, LossTarget};
use crate::seed::derive_seed;

/// One row of the trace series CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub epoch: usize,
    pub task_label: String,
    pub trace_mean: f64,
    pub trace_stderr: f64,
    pub n_samples: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RitzPair {
    pub value: f64,
    pub weight: f64,
}

/// Density snapshot document.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct DensityDoc {
    pub epoch: usize,
    pub task_label: String,
    pub sigma: f64,
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    /// Ritz pairs of all runs; weights are divided by the run count so they
    /// sum to one overall.
    pub ritz: Vec<RitzPair>,
}

impl DensityDoc {
    pub fn from_density(epoch: usize, task_label: &str, d: &SpectralDensity) -> Self {
        DensityDoc {
            epoch,
            task_label: task_label.to_string(),
            sigma: d.sigma,
            grid: d.grid.clone(),
            density: d.density.clone(),
            ritz: d
                .pooled_ritz()
                .into_iter()
                .map(|(value, weight)| RitzPair { value, weight })
                .collect(),
        }
    }

    pub fn integral(&self) -> f64 {
        crate::curvature::trapezoid(&self.grid, &self.density)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Snapshot {
    pub traces: Vec<TraceRow>,
    pub densities: Vec<DensityDoc>,
}

/// Traces every operator with the same probe vectors and computes a density
/// for each operator in `density_ops`.
pub fn snapshot_operators<O: CurvatureOperator>(
    epoch: usize,
    trace_ops: &[O],
    density_ops: &[usize],
    cfg: &CurvatureConfig,
    probe_seed: u64,
    exec: Execution,
) -> Result<Snapshot> {
    let mut traces = Vec::with_capacity(trace_ops.len());
    for op in trace_ops {
        let est = hutchinson_trace_with(op, cfg.probes, probe_seed, exec, false)?;
        traces.push(TraceRow {
            epoch,
            task_label: op.label().to_string(),
            trace_mean: est.mean,
            trace_stderr: est.stderr,
            n_samples: est.n_samples,
        });
    }
    let mut densities = Vec::with_capacity(density_ops.len());
    for &i in density_ops {
        let op = trace_ops
            .get(i)
            .ok_or_else(|| Error::InvalidArgument(format!("no operator {i}")))?;
        let opts = SlqOptions {
            iterations: cfg.lanczos_iterations.min(op.dim()),
            runs: cfg.runs,
            sigma: cfg.sigma,
            grid_points: cfg.grid_points,
            exec,
            ..Default::default()
        };
        let d = slq_density(op, &opts, derive_seed(probe_seed, "slq", 0))?;
        densities.push(DensityDoc::from_density(epoch, op.label(), &d));
    }
    Ok(Snapshot { traces, densities })
}

/// The graphs curvature is measured on: the training split, or its first
/// `subset` graphs.
pub fn curvature_set<'a>(train: &'a [Multigraph], cfg: &CurvatureConfig) -> &'a [Multigraph] {
    match cfg.subset {
        Some(n) => &train[..n.min(train.len())],
        None => train,
    }
}

/// Per-task Hessians over the shared block (heads frozen), plus the total
/// loss Hessian; densities for the tasks only.
pub fn curvature_snapshot(
    model: &GnModel,
    params: &ParamSet,
    train: &[Multigraph],
    epoch: usize,
    cfg: &TrainConfig,
) -> Result<Snapshot> {
    let graphs = curvature_set(train, &cfg.curvature);
    let batch = batch_graphs(graphs)?;
    let tasks = model.config().task_count;
    let mut ops = Vec::with_capacity(tasks + 1);
    for target in (0..tasks).map(LossTarget::Task).chain([LossTarget::Total]) {
        let obj = model.objective(&batch, target)?;
        ops.push(hessian_operator(obj, params, BlockSel::Shared, target.label()));
    }
    let density_ops: Vec<usize> = (0..tasks).collect();
    snapshot_operators(epoch, &ops, &density_ops, &cfg.curvature, cfg.seeds.probes, cfg.execution)
}

/// Curvature for one task only, as used by the `curvature` command.
#[allow(clippy::too_many_arguments)]
pub fn task_snapshot(
    model: &GnModel,
    params: &ParamSet,
    graphs: &[Multigraph],
    task: usize,
    epoch: usize,
    cfg: &CurvatureConfig,
    probe_seed: u64,
    exec: Execution,
) -> Result<Snapshot> {
    let batch = batch_graphs(graphs)?;
    let target = LossTarget::Task(task);
    let obj = model.objective(&batch, target)?;
    let op = hessian_operator(obj, params, BlockSel::Shared, target.label());
    snapshot_operators(epoch, &[op], &[0], cfg, probe_seed, exec)
}

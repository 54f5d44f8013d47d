//! Multi-task training with AdamW, per-epoch metrics and scheduled curvature
//! snapshots.

mod checkpoint;
mod config;
mod optim;
mod snapshot;

use std::collections::BTreeSet;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub use checkpoint::{Checkpoint, FORMAT_VERSION};
pub use config::{lr_at, AdamWConfig, CurvatureConfig, Seeds, TrainConfig};
pub use optim::{adamw_step, OptimizerState};
pub use snapshot::{
    curvature_set, curvature_snapshot, snapshot_operators, task_snapshot, DensityDoc, RitzPair, Snapshot, TraceRow,
};

use crate::autodiff::{value_and_grad, Block, BlockSel, ParamSet};
use crate::dataset::Prepared;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fsio;
use crate::graph::{batch_graphs, Multigraph};
use crate::model::{GnModel, LossTarget};
use crate::seed::derive_seed;

/// Graphs per forward pass when evaluating metrics.
const EVAL_CHUNK: usize = 16;

/// Per-task standardized MAE and MSE over one split.
#[derive(Clone, Debug, PartialEq)]
pub struct SplitMetrics {
    pub mae: Vec<f64>,
    pub mse: Vec<f64>,
}

/// Mean absolute and squared error of every task over `graphs`, whose
/// targets are already standardized.
pub fn evaluate(model: &GnModel, params: &ParamSet, graphs: &[Multigraph], exec: Execution) -> Result<SplitMetrics> {
    let tasks = model.config().task_count;
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("cannot evaluate an empty split".into()));
    }
    let chunks: Vec<&[Multigraph]> = graphs.chunks(EVAL_CHUNK).collect();
    let preds = exec::try_map_indexed(exec, chunks.len(), |c| {
        let batch = batch_graphs(chunks[c])?;
        model.predict_batch(&batch, params)
    })?;
    let mut abs = vec![0.0; tasks];
    let mut sq = vec![0.0; tasks];
    for (chunk, pred) in chunks.iter().zip(&preds) {
        for (g, row) in chunk.iter().zip(pred.chunks_exact(tasks)) {
            for t in 0..tasks {
                let r = row[t] - g.targets[t];
                abs[t] += r.abs();
                sq[t] += r * r;
            }
        }
    }
    let n = graphs.len() as f64;
    Ok(SplitMetrics {
        mae: abs.iter().map(|a| a / n).collect(),
        mse: sq.iter().map(|s| s / n).collect(),
    })
}

/// Per-task standardized MAE.
pub fn evaluate_mae(model: &GnModel, params: &ParamSet, graphs: &[Multigraph]) -> Result<Vec<f64>> {
    Ok(evaluate(model, params, graphs, Execution::default())?.mae)
}

/// Copy of `params` with every head zeroed, so that every prediction is 0.
pub fn zero_heads(params: &ParamSet) -> ParamSet {
    let mut out = params.clone();
    for e in params.iter().filter(|e| matches!(e.block, Block::Task(_))) {
        if let Some(t) = out.get_mut(&e.name) {
            t.data_mut().fill(0.0);
        }
    }
    out
}

/// Total loss and gradient over a minibatch, computed in chunks that may run
/// in parallel and are summed in chunk order.
pub fn minibatch_grad(
    model: &GnModel,
    params: &ParamSet,
    graphs: &[&Multigraph],
    chunk: usize,
    exec: Execution,
) -> Result<(f64, Vec<f64>)> {
    let denom = graphs.len() as f64;
    let chunks: Vec<&[&Multigraph]> = graphs.chunks(chunk).collect();
    let parts = exec::try_map_indexed(exec, chunks.len(), |c| {
        let batch = batch_graphs(chunks[c].iter().copied())?;
        let obj = model.objective(&batch, LossTarget::Total)?.with_denominator(denom);
        value_and_grad(&obj, params, BlockSel::All)
    })?;
    let mut loss = 0.0;
    let mut grad = vec![0.0; params.block_len(BlockSel::All)];
    for (l, g) in parts {
        loss += l;
        for (a, b) in grad.iter_mut().zip(g.iter()) {
            *a += b;
        }
    }
    Ok((loss, grad))
}

/// One row of the metrics CSV.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub epoch: usize,
    pub split: String,
    pub task_label: String,
    pub standardized_mae: f64,
    pub loss: f64,
}

/// Paths written by a run.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct RunArtifacts {
    pub metrics_csv: PathBuf,
    pub trace_csv: PathBuf,
    pub density_files: Vec<PathBuf>,
    pub checkpoints: Vec<PathBuf>,
    pub preprocessing: PathBuf,
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    pub artifacts: RunArtifacts,
    pub metrics: Vec<MetricRow>,
    pub traces: Vec<TraceRow>,
    pub densities: Vec<DensityDoc>,
    pub params: ParamSet,
    /// Predict-zero metrics on the training split.
    pub baseline_train: SplitMetrics,
}

impl TrainOutcome {
    /// Train MAE of every task at the last epoch.
    pub fn final_train_mae(&self) -> Vec<f64> {
        let last = self.metrics.iter().map(|m| m.epoch).max().unwrap_or(0);
        self.metrics
            .iter()
            .filter(|m| m.epoch == last && m.split == "train")
            .map(|m| m.standardized_mae)
            .collect()
    }
}

pub fn csv_bytes<T: Serialize>(rows: &[T], header: &[&str]) -> Result<Vec<u8>> {
    let mut w = csv::WriterBuilder::new().has_headers(false).from_writer(Vec::new());
    w.write_record(header)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.into_inner()
        .map_err(|e| Error::InvalidArgument(format!("csv buffer: {e}")))
}

pub const METRICS_HEADER: [&str; 5] = ["epoch", "split", "task_label", "standardized_mae", "loss"];
pub const TRACE_HEADER: [&str; 5] = ["epoch", "task_label", "trace_mean", "trace_stderr", "n_samples"];

fn check_dims(cfg: &TrainConfig, graphs: &[Multigraph]) -> Result<()> {
    let m = &cfg.model;
    for g in graphs {
        let edge_ok = g.edge_dim().is_none_or(|e| e == m.edge_dim);
        if g.node_dim() != m.node_dim || !edge_ok || g.task_count() != m.task_count {
            return Err(Error::InvalidGraph {
                id: g.id.clone(),
                reason: format!(
                    "widths (V={}, E={:?}, T={}) do not match the model (V={}, E={}, T={})",
                    g.node_dim(),
                    g.edge_dim(),
                    g.task_count(),
                    m.node_dim,
                    m.edge_dim,
                    m.task_count
                ),
            });
        }
    }
    Ok(())
}

struct Recorder<'a> {
    outdir: &'a Path,
    artifacts: RunArtifacts,
    metrics: Vec<MetricRow>,
    traces: Vec<TraceRow>,
    densities: Vec<DensityDoc>,
}

impl Recorder<'_> {
    fn log_metrics(&mut self, epoch: usize, split: &str, m: &SplitMetrics) {
        for (t, (&mae, &mse)) in m.mae.iter().zip(&m.mse).enumerate() {
            self.metrics.push(MetricRow {
                epoch,
                split: split.to_string(),
                task_label: LossTarget::Task(t).label(),
                standardized_mae: mae,
                loss: mse,
            });
        }
    }

    fn flush_tables(&self) -> Result<()> {
        fsio::write_atomic(&self.artifacts.metrics_csv, &csv_bytes(&self.metrics, &METRICS_HEADER)?)?;
        fsio::write_atomic(&self.artifacts.trace_csv, &csv_bytes(&self.traces, &TRACE_HEADER)?)
    }

    fn record_snapshot(&mut self, snap: Snapshot) -> Result<()> {
        for doc in snap.densities {
            let path = self
                .outdir
                .join("densities")
                .join(format!("epoch{:05}_{}.json", doc.epoch, doc.task_label));
            fsio::write_json_atomic(&path, &doc)?;
            self.artifacts.density_files.push(path);
            self.densities.push(doc);
        }
        self.traces.extend(snap.traces);
        Ok(())
    }

    fn checkpoint(&mut self, ck: &Checkpoint) -> Result<()> {
        let path = self.outdir.join("checkpoints").join(format!("epoch{:05}.json", ck.epoch));
        ck.save(&path)?;
        self.artifacts.checkpoints.push(path);
        Ok(())
    }
}

/// Trains on `data.train`, evaluating on both splits every epoch and taking
/// curvature snapshots on the configured schedule. Artifacts go to `outdir`.
pub fn train(cfg: &TrainConfig, data: &Prepared, outdir: &Path) -> Result<TrainOutcome> {
    cfg.validate()?;
    check_dims(cfg, &data.train)?;
    check_dims(cfg, &data.test)?;
    if data.train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let exec = cfg.execution;
    let model = GnModel::new(cfg.model.clone())?;
    let mut params = model.init_params(cfg.seeds.init)?;
    let mut flat = params.flatten(BlockSel::All).into_inner();
    let mut state = OptimizerState::new(flat.len());
    let schedule: BTreeSet<usize> = cfg.snapshot_schedule().into_iter().collect();
    let sidecar = data.sidecar();

    let mut rec = Recorder {
        outdir,
        artifacts: RunArtifacts {
            metrics_csv: outdir.join("metrics.csv"),
            trace_csv: outdir.join("traces.csv"),
            preprocessing: outdir.join("preprocessing.json"),
            ..Default::default()
        },
        metrics: Vec::new(),
        traces: Vec::new(),
        densities: Vec::new(),
    };
    fsio::write_json_atomic(&rec.artifacts.preprocessing, &sidecar)?;
    fsio::write_json_atomic(&outdir.join("config.json"), cfg)?;

    let baseline_train = evaluate(&model, &zero_heads(&params), &data.train, exec)?;
    let mut order: Vec<usize> = (0..data.train.len()).collect();

    for epoch in 0..=cfg.epochs {
        if epoch > 0 {
            let lr = lr_at(epoch, cfg);
            order.sort_unstable();
            order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(cfg.seeds.shuffle, "epoch", epoch as u64)));
            for (b, idx) in order.chunks(cfg.batch_size).enumerate() {
                let graphs: Vec<&Multigraph> = idx.iter().map(|&i| &data.train[i]).collect();
                let (loss, grad) = minibatch_grad(&model, &params, &graphs, cfg.grad_chunk, exec)?;
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::NonFinite(format!("loss at epoch {epoch}, batch {b}")));
                }
                adamw_step(&mut flat, &grad, &mut state, lr, &cfg.adamw)?;
                params = params.unflatten(&flat, BlockSel::All)?;
            }
        }
        let train_m = evaluate(&model, &params, &data.train, exec)?;
        rec.log_metrics(epoch, "train", &train_m);
        if !data.test.is_empty() {
            let test_m = evaluate(&model, &params, &data.test, exec)?;
            rec.log_metrics(epoch, "test", &test_m);
        }
        log::info!("epoch {epoch}: train mae {:?}", train_m.mae);

        if schedule.contains(&epoch) {
            let snap = curvature_snapshot(&model, &params, &data.train, epoch, cfg)?;
            for row in &snap.traces {
                log::info!("epoch {epoch}: trace {} = {:.6e} ± {:.1e}", row.task_label, row.trace_mean, row.trace_stderr);
            }
            rec.record_snapshot(snap)?;
            rec.checkpoint(&Checkpoint::new(epoch, cfg, sidecar.clone(), &params))?;
            rec.flush_tables()?;
        }
    }
    if !schedule.contains(&cfg.epochs) {
        rec.checkpoint(&Checkpoint::new(cfg.epochs, cfg, sidecar, &params))?;
    }
    rec.flush_tables()?;

    Ok(TrainOutcome {
        artifacts: rec.artifacts,
        metrics: rec.metrics,
        traces: rec.traces,
        densities: rec.densities,
        params,
        baseline_train,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::{prepare, synth_generate, PreprocessConfig};
    use crate::model::GnConfig;

    fn small_config() -> TrainConfig {
        TrainConfig {
            epochs: 2,
            batch_size: 8,
            grad_chunk: 4,
            snapshot_epochs: Some(vec![0, 2]),
            curvature: CurvatureConfig {
                probes: 3,
                lanczos_iterations: 4,
                runs: 2,
                grid_points: 32,
                subset: Some(6),
                ..Default::default()
            },
            model: GnConfig {
                latent_dim: 4,
                steps: 1,
                edge_node_hidden: 6,
                global_hidden: 5,
                head_hidden: vec![3],
                ..Default::default()
            },
            ..Default::default()
        }
    }

    #[test]
    fn zero_heads_predict_zero_and_baseline_is_mean_abs() {
        let data = prepare(&synth_generate(20, 1), &PreprocessConfig::default()).unwrap();
        let model = GnModel::new(small_config().model).unwrap();
        let params = zero_heads(&model.init_params(3).unwrap());
        let mae = evaluate_mae(&model, &params, &data.train).unwrap();
        for (t, m) in mae.iter().enumerate() {
            let direct = data.train.iter().map(|g| g.targets[t].abs()).sum::<f64>() / data.train.len() as f64;
            assert!((m - direct).abs() < 1e-12);
        }
    }

    #[test]
    fn chunked_gradient_matches_whole_batch() {
        let data = prepare(&synth_generate(16, 2), &PreprocessConfig::default()).unwrap();
        let model = GnModel::new(small_config().model).unwrap();
        let params = model.init_params(1).unwrap();
        let graphs: Vec<&Multigraph> = data.train.iter().take(8).collect();
        let (l1, g1) = minibatch_grad(&model, &params, &graphs, 8, Execution::Sequential).unwrap();
        let (l2, g2) = minibatch_grad(&model, &params, &graphs, 3, Execution::Parallel).unwrap();
        assert!((l1 - l2).abs() < 1e-12 * l1.abs().max(1.0));
        for (a, b) in g1.iter().zip(&g2) {
            assert!((a - b).abs() < 1e-10 * (1.0 + a.abs()));
        }
    }

    #[test]
    fn tiny_run_writes_artifacts() {
        let data = prepare(&synth_generate(24, 3), &PreprocessConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let out = train(&small_config(), &data, dir.path()).unwrap();
        assert_eq!(out.traces.len(), 2 * 4);
        assert_eq!(out.densities.len(), 2 * 3);
        assert_eq!(out.artifacts.checkpoints.len(), 2);
        assert!(out.artifacts.metrics_csv.exists() && out.artifacts.trace_csv.exists());
        // Epochs 0..=2, two splits, three tasks.
        assert_eq!(out.metrics.len(), 3 * 2 * 3);
        let text = std::fs::read_to_string(&out.artifacts.trace_csv).unwrap();
        assert!(text.starts_with("epoch,task_label,trace_mean,trace_stderr,n_samples\n"));
    }

    #[test]
    fn no_snapshots_means_metrics_only() {
        let data = prepare(&synth_generate(12, 4), &PreprocessConfig::default()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let cfg = TrainConfig {
            epochs: 1,
            snapshot_epochs: Some(vec![]),
            ..small_config()
        };
        let out = train(&cfg, &data, dir.path()).unwrap();
        assert!(out.traces.is_empty() && out.densities.is_empty());
        assert!(!dir.path().join("densities").exists());
    }

    #[test]
    fn width_mismatch_rejected() {
        let data = prepare(&synth_generate(12, 4), &PreprocessConfig::default()).unwrap();
        let mut cfg = small_config();
        cfg.model.node_dim = 5;
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(train(&cfg, &data, dir.path()), Err(Error::InvalidGraph { .. })));
    }
}

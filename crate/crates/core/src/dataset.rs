//! Dataset I/O, target preprocessing, featurization and the synthetic
//! coupled-target generator.

use std::collections::HashSet;
use std::fmt::Write as _;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::fsio;
use crate::graph::{symmetrize_edges, validate_graph, Edge, Multigraph};
use crate::seed::derive_seed;

/// Number of decile bins.
pub const DECILES: usize = 10;

// ---------------------------------------------------------------- I/O

/// Parses a JSONL dataset, one graph per non-blank line.
pub fn parse_dataset(text: &str) -> Result<Vec<Multigraph>> {
    let mut graphs = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line_no = i + 1;
        if line.trim().is_empty() {
            continue;
        }
        let g: Multigraph = serde_json::from_str(line).map_err(|e| Error::Parse {
            line: line_no,
            reason: describe_parse_failure(line, &e),
        })?;
        if let Err(diags) = validate_graph(&g) {
            let reason = diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; ");
            return Err(Error::InvalidGraph {
                id: format!("{} (line {line_no})", g.id),
                reason,
            });
        }
        graphs.push(g);
    }
    Ok(graphs)
}

/// JSON has no NaN or infinity; records that spell them out fail to parse.
/// Recover the graph id so the message says which record was rejected.
fn describe_parse_failure(line: &str, err: &serde_json::Error) -> String {
    let lenient = line
        .replace("-Infinity", "null")
        .replace("Infinity", "null")
        .replace("NaN", "null");
    let id = serde_json::from_str::<serde_json::Value>(&lenient)
        .ok()
        .and_then(|v| v.get("id").and_then(|id| id.as_str()).map(str::to_owned));
    match id {
        Some(id) if lenient != line => format!("graph {id}: non-finite number"),
        Some(id) => format!("graph {id}: {err}"),
        None => err.to_string(),
    }
}

pub fn load_dataset(path: &Path) -> Result<Vec<Multigraph>> {
    parse_dataset(&fsio::read_to_string(path)?)
}

pub fn dataset_to_jsonl(graphs: &[Multigraph]) -> Result<String> {
    let mut out = String::new();
    for g in graphs {
        out.push_str(&serde_json::to_string(g)?);
        out.push('\n');
    }
    Ok(out)
}

pub fn write_dataset(path: &Path, graphs: &[Multigraph]) -> Result<()> {
    fsio::write_atomic(path, dataset_to_jsonl(graphs)?.as_bytes())
}

// ---------------------------------------------------------------- targets

/// Percentile of ascending `sorted` with linear interpolation between ranks.
pub fn percentile(sorted: &[f64], pct: f64) -> f64 {
    let pos = pct / 100.0 * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = (lo + 1).min(sorted.len() - 1);
    let frac = pos - lo as f64;
    sorted[lo] + frac * (sorted[hi] - sorted[lo])
}

fn sorted_copy(values: &[f64]) -> Vec<f64> {
    let mut s = values.to_vec();
    s.sort_by(f64::total_cmp);
    s
}

/// Indices of values inside the closed `[lo_pct, hi_pct]` percentile band.
pub fn percentile_filter(values: &[f64], lo_pct: f64, hi_pct: f64) -> Result<Vec<usize>> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("percentile_filter on empty input".into()));
    }
    if !(0.0..=100.0).contains(&lo_pct) || !(0.0..=100.0).contains(&hi_pct) || lo_pct >= hi_pct {
        return Err(Error::InvalidArgument(format!(
            "invalid percentile band [{lo_pct}, {hi_pct}]"
        )));
    }
    let sorted = sorted_copy(values);
    let (lo, hi) = (percentile(&sorted, lo_pct), percentile(&sorted, hi_pct));
    Ok(values
        .iter()
        .enumerate()
        .filter(|(_, &v)| lo <= v && v <= hi)
        .map(|(i, _)| i)
        .collect())
}

/// Natural log of strictly positive values.
pub fn log_transform(values: &[f64]) -> Result<Vec<f64>> {
    values
        .iter()
        .enumerate()
        .map(|(i, &v)| {
            if v > 0.0 {
                Ok(v.ln())
            } else {
                Err(Error::InvalidArgument(format!(
                    "log_transform: value {v} at index {i} is not positive"
                )))
            }
        })
        .collect()
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TaskStats {
    pub mean: f64,
    pub std: f64,
}

/// Per-task target statistics, fitted on the training split.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TargetStats {
    pub per_task: Vec<TaskStats>,
}

impl TargetStats {
    pub fn task_count(&self) -> usize {
        self.per_task.len()
    }
}

/// Mean and population standard deviation of one target.
pub fn fit_task(values: &[f64], task: usize) -> Result<TaskStats> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot fit statistics on no values".into()));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let var = values.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n;
    let std = var.sqrt();
    if !(std > 0.0 && std.is_finite()) {
        return Err(Error::DegenerateTarget(task));
    }
    Ok(TaskStats { mean, std })
}

/// Fits every task over the given graphs.
pub fn fit_stats(train: &[Multigraph]) -> Result<TargetStats> {
    let tasks = train.first().map_or(0, Multigraph::task_count);
    let per_task = (0..tasks)
        .map(|t| fit_task(&task_values(train, t), t))
        .collect::<Result<_>>()?;
    Ok(TargetStats { per_task })
}

pub fn standardize(values: &[f64], stats: TaskStats) -> Vec<f64> {
    values.iter().map(|v| (v - stats.mean) / stats.std).collect()
}

pub fn task_values(graphs: &[Multigraph], task: usize) -> Vec<f64> {
    graphs.iter().map(|g| g.targets[task]).collect()
}

/// Replaces each graph's targets with their standardized values.
pub fn standardize_graphs(graphs: &[Multigraph], stats: &TargetStats) -> Result<Vec<Multigraph>> {
    graphs
        .iter()
        .map(|g| {
            if g.task_count() != stats.task_count() {
                return Err(Error::InvalidGraph {
                    id: g.id.clone(),
                    reason: format!("{} targets, stats cover {}", g.task_count(), stats.task_count()),
                });
            }
            let mut out = g.clone();
            for (y, s) in out.targets.iter_mut().zip(&stats.per_task) {
                *y = (*y - s.mean) / s.std;
            }
            Ok(out)
        })
        .collect()
}

// ---------------------------------------------------------------- featurization

pub fn one_hot<T: PartialEq + std::fmt::Debug>(category: &T, vocabulary: &[T]) -> Result<Vec<f64>> {
    let idx = vocabulary
        .iter()
        .position(|v| v == category)
        .ok_or_else(|| Error::InvalidArgument(format!("unknown category {category:?}")))?;
    let mut v = vec![0.0; vocabulary.len()];
    v[idx] = 1.0;
    Ok(v)
}

/// The nine interior decile edges (10th to 90th percentile) of `train`.
pub fn decile_bins(train: &[f64]) -> Result<Vec<f64>> {
    if train.is_empty() {
        return Err(Error::InvalidArgument("decile_bins on empty training set".into()));
    }
    let sorted = sorted_copy(train);
    Ok((1..DECILES).map(|k| percentile(&sorted, 10.0 * k as f64)).collect())
}

/// Bin index of `value`: bins are left-closed and the end bins absorb
/// everything outside the edges.
pub fn bin_index(value: f64, edges: &[f64]) -> usize {
    edges.partition_point(|&e| e <= value)
}

pub fn apply_bins(value: f64, edges: &[f64]) -> Vec<f64> {
    let mut v = vec![0.0; edges.len() + 1];
    v[bin_index(value, edges)] = 1.0;
    v
}

/// Decile edges of each raw edge-feature column over all training edges.
pub fn fit_edge_bins(train: &[Multigraph]) -> Result<Vec<Vec<f64>>> {
    let dim = train.iter().find_map(Multigraph::edge_dim).unwrap_or(0);
    (0..dim)
        .map(|c| {
            let col: Vec<f64> = train.iter().flat_map(|g| g.edges.iter().map(move |e| e.feat[c])).collect();
            decile_bins(&col)
        })
        .collect()
}

/// Replaces every raw edge feature by its decile one-hot encoding.
pub fn bin_edge_features(graphs: &[Multigraph], bins: &[Vec<f64>]) -> Result<Vec<Multigraph>> {
    graphs
        .iter()
        .map(|g| {
            let mut out = g.clone();
            for e in &mut out.edges {
                if e.feat.len() != bins.len() {
                    return Err(Error::InvalidGraph {
                        id: g.id.clone(),
                        reason: format!("edge width {}, bins fitted for {}", e.feat.len(), bins.len()),
                    });
                }
                e.feat = e.feat.iter().zip(bins).flat_map(|(&x, edges)| apply_bins(x, edges)).collect();
            }
            Ok(out)
        })
        .collect()
}

// ---------------------------------------------------------------- splitting

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SplitSpec {
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            train_fraction: 0.7,
            seed: 0,
        }
    }
}

/// Shuffles deterministically and puts the first `⌊f·n⌋` graphs in train.
pub fn split(graphs: &[Multigraph], spec: SplitSpec) -> Result<(Vec<Multigraph>, Vec<Multigraph>)> {
    if !(spec.train_fraction > 0.0 && spec.train_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "train fraction must be in (0, 1), got {}",
            spec.train_fraction
        )));
    }
    let mut order: Vec<usize> = (0..graphs.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(derive_seed(spec.seed, "split", 0)));
    let n_train = (spec.train_fraction * graphs.len() as f64).floor() as usize;
    let pick = |idx: &[usize]| idx.iter().map(|&i| graphs[i].clone()).collect::<Vec<_>>();
    Ok((pick(&order[..n_train]), pick(&order[n_train..])))
}

// ---------------------------------------------------------------- pipeline

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    /// Percentile band applied to each task independently; kept sets intersect.
    pub filter_percentiles: Option<(f64, f64)>,
    /// Tasks whose targets are log-transformed before standardization.
    pub log_tasks: Vec<usize>,
    pub split: SplitSpec,
    /// Replace raw edge features with decile one-hot encodings.
    pub bin_edges: bool,
}

/// Stats and bin edges written next to a run so it can be reproduced.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Sidecar {
    pub per_task: Vec<TaskStats>,
    pub edge_bins: Vec<Vec<f64>>,
}

#[derive(Clone, Debug)]
pub struct Prepared {
    /// Standardized training graphs.
    pub train: Vec<Multigraph>,
    /// Standardized test graphs.
    pub test: Vec<Multigraph>,
    pub stats: TargetStats,
    pub edge_bins: Vec<Vec<f64>>,
}

impl Prepared {
    pub fn sidecar(&self) -> Sidecar {
        Sidecar {
            per_task: self.stats.per_task.clone(),
            edge_bins: self.edge_bins.clone(),
        }
    }
}

/// Filter, log-transform, split, fit on train, standardize, featurize.
pub fn prepare(graphs: &[Multigraph], cfg: &PreprocessConfig) -> Result<Prepared> {
    if graphs.is_empty() {
        return Err(Error::InvalidArgument("empty dataset".into()));
    }
    let tasks = graphs[0].task_count();
    let mut graphs: Vec<Multigraph> = graphs.to_vec();

    if let Some((lo, hi)) = cfg.filter_percentiles {
        let mut keep: HashSet<usize> = (0..graphs.len()).collect();
        for t in 0..tasks {
            let kept: HashSet<usize> = percentile_filter(&task_values(&graphs, t), lo, hi)?.into_iter().collect();
            keep.retain(|i| kept.contains(i));
        }
        graphs = graphs
            .into_iter()
            .enumerate()
            .filter(|(i, _)| keep.contains(i))
            .map(|(_, g)| g)
            .collect();
    }
    for &t in &cfg.log_tasks {
        if t >= tasks {
            return Err(Error::InvalidArgument(format!("log task {t} out of range")));
        }
        let logged = log_transform(&task_values(&graphs, t))?;
        for (g, y) in graphs.iter_mut().zip(logged) {
            g.targets[t] = y;
        }
    }

    let (train, test) = split(&graphs, cfg.split)?;
    if train.is_empty() {
        return Err(Error::InvalidArgument("training split is empty".into()));
    }
    let stats = fit_stats(&train)?;
    let (mut train, mut test) = (standardize_graphs(&train, &stats)?, standardize_graphs(&test, &stats)?);
    let mut edge_bins = Vec::new();
    if cfg.bin_edges {
        edge_bins = fit_edge_bins(&train)?;
        train = bin_edge_features(&train, &edge_bins)?;
        test = bin_edge_features(&test, &edge_bins)?;
    }
    Ok(Prepared {
        train,
        test,
        stats,
        edge_bins,
    })
}

// ---------------------------------------------------------------- synthetic data

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SynthConfig {
    pub node_vocab_size: usize,
    pub edge_feat_dim: usize,
    pub min_nodes: usize,
    pub max_nodes: usize,
    pub edge_prob: f64,
    pub parallel_prob: f64,
}

impl Default for SynthConfig {
    fn default() -> Self {
        SynthConfig {
            node_vocab_size: 8,
            edge_feat_dim: 4,
            min_nodes: 4,
            max_nodes: 16,
            edge_prob: 0.3,
            parallel_prob: 0.05,
        }
    }
}

/// Isotropic Poisson ratio from shear modulus `g` and bulk modulus `k`.
pub fn poisson_ratio(g: f64, k: f64) -> f64 {
    (3.0 * k - 2.0 * g) / (2.0 * (3.0 * k + g))
}

/// `n` random symmetric multigraphs with targets `(G, K, ν(G, K))`.
pub fn synth_generate(n: usize, seed: u64) -> Vec<Multigraph> {
    synth_generate_with(n, seed, &SynthConfig::default(), Execution::default())
}

pub fn synth_generate_with(n: usize, seed: u64, cfg: &SynthConfig, exec: Execution) -> Vec<Multigraph> {
    exec::map_indexed(exec, n, |i| synth_graph(i, derive_seed(seed, "synth", i as u64), cfg))
}

fn synth_graph(index: usize, seed: u64, cfg: &SynthConfig) -> Multigraph {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = rng.random_range(cfg.min_nodes..=cfg.max_nodes);
    let nodes: Vec<Vec<f64>> = (0..n)
        .map(|_| {
            let mut row = vec![0.0; cfg.node_vocab_size];
            row[rng.random_range(0..cfg.node_vocab_size)] = 1.0;
            row
        })
        .collect();

    // Undirected pair features, so both directions of a pair agree.
    let mut pair_feat: std::collections::BTreeMap<(usize, usize), Vec<f64>> = Default::default();
    let mut feat_for = |a: usize, b: usize, rng: &mut ChaCha8Rng| {
        pair_feat
            .entry((a.min(b), a.max(b)))
            .or_insert_with(|| (0..cfg.edge_feat_dim).map(|_| rng.random::<f64>()).collect())
            .clone()
    };
    let mut edges = Vec::new();
    let mut present = HashSet::new();
    for src in 0..n {
        for dst in 0..n {
            if src != dst && rng.random_bool(cfg.edge_prob) {
                edges.push(Edge { src, dst, key: 0, feat: feat_for(src, dst, &mut rng) });
                present.insert((src, dst));
            }
        }
    }
    for v in 0..n - 1 {
        if !present.contains(&(v, v + 1)) && !present.contains(&(v + 1, v)) {
            edges.push(Edge { src: v, dst: v + 1, key: 0, feat: feat_for(v, v + 1, &mut rng) });
            present.insert((v, v + 1));
        }
    }
    let mut parallel = Vec::new();
    let mut doubled = HashSet::new();
    for e in &edges {
        let pair = (e.src.min(e.dst), e.src.max(e.dst));
        if !doubled.contains(&pair) && rng.random_bool(cfg.parallel_prob) {
            doubled.insert(pair);
            let feat = (0..cfg.edge_feat_dim).map(|_| rng.random::<f64>()).collect();
            parallel.push(Edge { src: e.src, dst: e.dst, key: 1, feat });
        }
    }
    edges.extend(parallel);

    let mut g = Multigraph {
        id: format!("synth-{index:06}"),
        nodes,
        edges,
        targets: Vec::new(),
    };
    g = symmetrize_edges(&g).expect("pair features are shared by construction");
    let mean_first = g.edges.iter().map(|e| e.feat[0]).sum::<f64>() / g.edge_count() as f64;
    let shear = g.edge_count() as f64 / n as f64 + mean_first;
    let bulk = shear + 1.0 + n as f64 / 16.0;
    g.targets = vec![shear, bulk, poisson_ratio(shear, bulk)];
    g
}

/// Short human-readable summary, one line per task.
pub fn describe(graphs: &[Multigraph]) -> String {
    let mut out = String::new();
    let nodes: usize = graphs.iter().map(Multigraph::node_count).sum();
    let edges: usize = graphs.iter().map(Multigraph::edge_count).sum();
    let _ = writeln!(out, "{} graphs, {nodes} nodes, {edges} directed edges", graphs.len());
    for t in 0..graphs.first().map_or(0, Multigraph::task_count) {
        let v = task_values(graphs, t);
        let mean = v.iter().sum::<f64>() / v.len() as f64;
        let (lo, hi) = v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), &x| (a.min(x), b.max(x)));
        let _ = writeln!(out, "task {t}: mean {mean:.6}, min {lo:.6}, max {hi:.6}");
    }
    out
}

//! Shared graph-network encoder with per-task feedforward heads.
//!
//! The encoder projects node and edge features into a common latent width,
//! starts the global feature at all-ones, and runs residual message-passing
//! steps. Each step updates edges, then nodes, then the global feature, and
//! finally layer-normalizes all three streams. Every task head reads the final
//! global feature and emits one scalar.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::autodiff::{self, Block, Objective, ParamSet, Scalar, Tape, Tensor, Var};
use crate::error::{Error, Result};
use crate::graph::{batch_graphs, GraphBatch, Multigraph};

/// Architecture hyperparameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GnConfig {
    /// Raw node feature width.
    pub node_dim: usize,
    /// Raw edge feature width.
    pub edge_dim: usize,
    /// Width of projected node, edge and global features.
    pub latent_dim: usize,
    /// Number of message-passing steps.
    pub steps: usize,
    /// Hidden width of the edge and node update networks.
    pub edge_node_hidden: usize,
    /// Hidden width of the global update network.
    pub global_hidden: usize,
    pub task_count: usize,
    /// Hidden layer widths of every task head.
    pub head_hidden: Vec<usize>,
    /// Reuse one set of update-network weights for all steps.
    pub shared_step_weights: bool,
}

impl Default for GnConfig {
    fn default() -> Self {
        GnConfig {
            node_dim: 8,
            edge_dim: 4,
            latent_dim: 64,
            steps: 5,
            edge_node_hidden: 256,
            global_hidden: 192,
            task_count: 3,
            head_hidden: vec![64],
            shared_step_weights: false,
        }
    }
}

impl GnConfig {
    pub fn validate(&self) -> Result<()> {
        let widths = [
            ("node_dim", self.node_dim),
            ("edge_dim", self.edge_dim),
            ("latent_dim", self.latent_dim),
            ("steps", self.steps),
            ("edge_node_hidden", self.edge_node_hidden),
            ("global_hidden", self.global_hidden),
            ("task_count", self.task_count),
        ];
        for (name, w) in widths {
            if w == 0 {
                return Err(Error::InvalidArgument(format!("{name} must be at least 1")));
            }
        }
        if self.head_hidden.contains(&0) {
            return Err(Error::InvalidArgument("head widths must be at least 1".into()));
        }
        Ok(())
    }

    /// Distinct step parameter groups (1 when weights are shared across steps).
    pub fn step_groups(&self) -> usize {
        if self.shared_step_weights {
            1
        } else {
            self.steps
        }
    }
}

/// Parameter indices of one two-hidden-layer network with a skip connection.
#[derive(Clone, Copy, Debug)]
struct MlpIdx {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

#[derive(Clone, Copy, Debug)]
struct NormIdx {
    scale: usize,
    offset: usize,
}

#[derive(Clone, Copy, Debug)]
struct StepIdx {
    edge: MlpIdx,
    node: MlpIdx,
    global: MlpIdx,
    norm_edge: NormIdx,
    norm_node: NormIdx,
    norm_global: NormIdx,
}

#[derive(Clone, Debug)]
struct HeadIdx {
    /// (weight, bias) per layer, output layer last.
    layers: Vec<(usize, usize)>,
}

/// Shape spec for one parameter, in canonical order.
#[derive(Clone, Debug)]
struct Slot {
    name: String,
    block: Block,
    shape: Vec<usize>,
    kind: SlotKind,
}

#[derive(Clone, Copy, Debug, PartialEq)]
enum SlotKind {
    Weight,
    Bias,
    NormScale,
    NormOffset,
}

/// The model: configuration plus the canonical parameter layout.
#[derive(Clone, Debug)]
pub struct GnModel {
    config: GnConfig,
    slots: Vec<Slot>,
    node_proj: usize,
    edge_proj: usize,
    steps: Vec<StepIdx>,
    heads: Vec<HeadIdx>,
}

struct LayoutBuilder {
    slots: Vec<Slot>,
}

impl LayoutBuilder {
    fn add(&mut self, name: String, block: Block, shape: Vec<usize>, kind: SlotKind) -> usize {
        self.slots.push(Slot {
            name,
            block,
            shape,
            kind,
        });
        self.slots.len() - 1
    }

    fn linear(&mut self, prefix: &str, block: Block, n_in: usize, n_out: usize, i: usize) -> (usize, usize) {
        let w = self.add(format!("{prefix}.w{i}"), block, vec![n_in, n_out], SlotKind::Weight);
        let b = self.add(format!("{prefix}.b{i}"), block, vec![n_out], SlotKind::Bias);
        (w, b)
    }

    fn mlp(&mut self, prefix: &str, n_in: usize, hidden: usize, n_out: usize) -> MlpIdx {
        let (w1, b1) = self.linear(prefix, Block::Shared, n_in, hidden, 1);
        let (w2, b2) = self.linear(prefix, Block::Shared, hidden, hidden, 2);
        let (w3, b3) = self.linear(prefix, Block::Shared, hidden, n_out, 3);
        MlpIdx {
            w1,
            b1,
            w2,
            b2,
            w3,
            b3,
        }
    }

    fn norm(&mut self, prefix: &str, width: usize) -> NormIdx {
        let scale = self.add(format!("{prefix}.scale"), Block::Shared, vec![width], SlotKind::NormScale);
        let offset = self.add(format!("{prefix}.offset"), Block::Shared, vec![width], SlotKind::NormOffset);
        NormIdx { scale, offset }
    }
}

/// Encoder state after a step: pre-normalization and normalized streams.
#[derive(Clone, Copy, Debug)]
pub struct StepOutput {
    pub nodes: Var,
    pub edges: Var,
    pub global: Var,
    pub nodes_pre_norm: Var,
    pub edges_pre_norm: Var,
    pub global_pre_norm: Var,
}

/// Which loss a [`LossObjective`] evaluates.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LossTarget {
    Task(usize),
    Total,
}

impl LossTarget {
    pub fn label(self) -> String {
        match self {
            LossTarget::Task(t) => format!("task{t}"),
            LossTarget::Total => "total".to_string(),
        }
    }
}

impl GnModel {
    pub fn new(config: GnConfig) -> Result<Self> {
        config.validate()?;
        let d = config.latent_dim;
        let mut lb = LayoutBuilder { slots: Vec::new() };
        let node_proj = lb.add("encoder.node_proj".into(), Block::Shared, vec![config.node_dim, d], SlotKind::Weight);
        let edge_proj = lb.add("encoder.edge_proj".into(), Block::Shared, vec![config.edge_dim, d], SlotKind::Weight);
        let mut steps = Vec::new();
        for s in 0..config.step_groups() {
            let p = format!("step{s}");
            let edge = lb.mlp(&format!("{p}.edge"), 4 * d, config.edge_node_hidden, d);
            let node = lb.mlp(&format!("{p}.node"), 4 * d, config.edge_node_hidden, d);
            let global = lb.mlp(&format!("{p}.global"), 3 * d, config.global_hidden, d);
            let norm_edge = lb.norm(&format!("{p}.norm_edge"), d);
            let norm_node = lb.norm(&format!("{p}.norm_node"), d);
            let norm_global = lb.norm(&format!("{p}.norm_global"), d);
            steps.push(StepIdx {
                edge,
                node,
                global,
                norm_edge,
                norm_node,
                norm_global,
            });
        }
        let mut heads = Vec::new();
        for t in 0..config.task_count {
            let prefix = format!("head{t}");
            let mut layers = Vec::new();
            let mut width = d;
            for (i, &h) in config.head_hidden.iter().enumerate() {
                layers.push(lb.linear(&prefix, Block::Task(t), width, h, i + 1));
                width = h;
            }
            layers.push(lb.linear(&prefix, Block::Task(t), width, 1, config.head_hidden.len() + 1));
            heads.push(HeadIdx { layers });
        }
        Ok(GnModel {
            config,
            slots: lb.slots,
            node_proj,
            edge_proj,
            steps,
            heads,
        })
    }

    pub fn config(&self) -> &GnConfig {
        &self.config
    }

    /// Parameter names in canonical order.
    pub fn param_names(&self) -> Vec<&str> {
        self.slots.iter().map(|s| s.name.as_str()).collect()
    }

    /// Checks that a parameter set has this model's layout.
    pub fn check_params(&self, params: &ParamSet) -> Result<()> {
        if params.len() != self.slots.len() {
            return Err(Error::Shape(format!(
                "expected {} parameter tensors, got {}",
                self.slots.len(),
                params.len()
            )));
        }
        for (slot, e) in self.slots.iter().zip(params.iter()) {
            if slot.name != e.name || slot.block != e.block || slot.shape != e.tensor.shape() {
                return Err(Error::Shape(format!(
                    "parameter {} does not match layout entry {} {:?}",
                    e.name, slot.name, slot.shape
                )));
            }
        }
        Ok(())
    }

    /// Glorot-uniform weights, zero biases, unit norm scales, zero norm offsets.
    pub fn init_params(&self, seed: u64) -> Result<ParamSet> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut params = ParamSet::new();
        for slot in &self.slots {
            let n: usize = slot.shape.iter().product();
            let data = match slot.kind {
                SlotKind::Weight => {
                    let a = (6.0 / (slot.shape[0] + slot.shape[1]) as f64).sqrt();
                    (0..n).map(|_| rng.random_range(-a..a)).collect()
                }
                SlotKind::Bias | SlotKind::NormOffset => vec![0.0; n],
                SlotKind::NormScale => vec![1.0; n],
            };
            params.push(slot.name.clone(), slot.block, Tensor::new(slot.shape.clone(), data)?)?;
        }
        Ok(params)
    }

    fn mlp<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], idx: &MlpIdx, input: Var) -> Result<Var> {
        let z1 = tape.matmul(input, p[idx.w1])?;
        let z1 = tape.add_row(z1, p[idx.b1])?;
        let h1 = tape.tanh(z1);
        let z2 = tape.matmul(h1, p[idx.w2])?;
        let z2 = tape.add_row(z2, p[idx.b2])?;
        let h2 = tape.tanh(z2);
        let h2 = tape.add(h2, h1)?;
        let out = tape.matmul(h2, p[idx.w3])?;
        tape.add_row(out, p[idx.b3])
    }

    fn norm<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], idx: &NormIdx, input: Var) -> Result<Var> {
        let n = tape.layer_norm(input)?;
        let n = tape.mul_row(n, p[idx.scale])?;
        tape.add_row(n, p[idx.offset])
    }

    fn check_batch(&self, batch: &GraphBatch) -> Result<()> {
        let c = &self.config;
        if batch.node_dim != c.node_dim {
            return Err(Error::Shape(format!(
                "node feature width {} but model expects {}",
                batch.node_dim, c.node_dim
            )));
        }
        if batch.total_edges() > 0 && batch.edge_dim != c.edge_dim {
            return Err(Error::Shape(format!(
                "edge feature width {} but model expects {}",
                batch.edge_dim, c.edge_dim
            )));
        }
        if batch.task_count != c.task_count {
            return Err(Error::Shape(format!(
                "{} targets but model has {} tasks",
                batch.task_count, c.task_count
            )));
        }
        Ok(())
    }

    /// Projected inputs `(x⁰, e⁰, u⁰)`.
    pub fn embed<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], batch: &GraphBatch) -> Result<(Var, Var, Var)> {
        self.check_batch(batch)?;
        let c = &self.config;
        let nodes = tape.constant(Tensor::from_parts(
            vec![batch.total_nodes(), c.node_dim],
            batch.node_features.iter().map(|&v| S::from_f64(v)).collect(),
        ));
        let edges = tape.constant(Tensor::from_parts(
            vec![batch.total_edges(), c.edge_dim],
            batch.edge_features.iter().map(|&v| S::from_f64(v)).collect(),
        ));
        let global = tape.constant(Tensor::filled(vec![batch.graph_count(), c.latent_dim], S::one()));
        let x0 = tape.matmul(nodes, p[self.node_proj])?;
        let e0 = tape.matmul(edges, p[self.edge_proj])?;
        Ok((x0, e0, global))
    }

    /// One message-passing step (`step` counts from 0).
    pub fn message_pass_step<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        p: &[Var],
        step: usize,
        (x, e, u): (Var, Var, Var),
        batch: &GraphBatch,
    ) -> Result<StepOutput> {
        let d = self.config.latent_dim;
        for v in [x, e, u] {
            if tape.shape(v).get(1) != Some(&d) {
                return Err(Error::Shape(format!(
                    "state width {:?}, expected {d}",
                    tape.shape(v)
                )));
            }
        }
        let idx = self.steps[if self.config.shared_step_weights { 0 } else { step }];
        let n_nodes = batch.total_nodes();
        let n_graphs = batch.graph_count();

        // Edge update from the edge, its endpoints and its graph's global feature.
        let x_src = tape.gather(x, batch.edge_src.clone())?;
        let x_dst = tape.gather(x, batch.edge_dst.clone())?;
        let u_edge = tape.gather(u, batch.edge_graph.clone())?;
        let edge_in = tape.concat(&[e, x_src, x_dst, u_edge])?;
        let de = self.mlp(tape, p, &idx.edge, edge_in)?;
        let e_new = tape.add(de, e)?;

        // Node update from outgoing and incoming edge sums.
        let h_out = tape.segment_sum(e_new, batch.edge_src.clone(), n_nodes)?;
        let h_in = tape.segment_sum(e_new, batch.edge_dst.clone(), n_nodes)?;
        let u_node = tape.gather(u, batch.node_graph.clone())?;
        let node_in = tape.concat(&[h_out, h_in, x, u_node])?;
        let dx = self.mlp(tape, p, &idx.node, node_in)?;
        let x_new = tape.add(dx, x)?;

        // Global update from per-graph edge and node sums.
        let e_sum = tape.segment_sum(e_new, batch.edge_graph.clone(), n_graphs)?;
        let x_sum = tape.segment_sum(x_new, batch.node_graph.clone(), n_graphs)?;
        let global_in = tape.concat(&[e_sum, x_sum, u])?;
        let du = self.mlp(tape, p, &idx.global, global_in)?;
        let u_new = tape.add(du, u)?;

        Ok(StepOutput {
            nodes: self.norm(tape, p, &idx.norm_node, x_new)?,
            edges: self.norm(tape, p, &idx.norm_edge, e_new)?,
            global: self.norm(tape, p, &idx.norm_global, u_new)?,
            nodes_pre_norm: x_new,
            edges_pre_norm: e_new,
            global_pre_norm: u_new,
        })
    }

    /// Graph-level representation `u^M`, one row per graph.
    pub fn encode<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], batch: &GraphBatch) -> Result<Var> {
        let mut state = self.embed(tape, p, batch)?;
        for step in 0..self.config.steps {
            let out = self.message_pass_step(tape, p, step, state, batch)?;
            state = (out.nodes, out.edges, out.global);
        }
        Ok(state.2)
    }

    /// Head `t` applied to encodings; returns a `graphs × 1` column.
    pub fn head<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var], task: usize, encoding: Var) -> Result<Var> {
        let head = self
            .heads
            .get(task)
            .ok_or_else(|| Error::InvalidArgument(format!("task {task} out of range")))?;
        let mut h = encoding;
        let last = head.layers.len() - 1;
        for (i, &(w, b)) in head.layers.iter().enumerate() {
            let z = tape.matmul(h, p[w])?;
            let z = tape.add_row(z, p[b])?;
            h = if i < last { tape.tanh(z) } else { z };
        }
        Ok(h)
    }

    /// Predictions for every graph in the batch, row-major `graphs × tasks`.
    pub fn predict_batch(&self, batch: &GraphBatch, params: &ParamSet) -> Result<Vec<f64>> {
        let t = autodiff::evaluate(&Predictions { model: self, batch }, params)?;
        Ok(t.into_data())
    }

    /// Predictions `(ŷ_1, …, ŷ_T)` for one valid, edge-symmetric graph.
    pub fn forward(&self, graph: &Multigraph, params: &ParamSet) -> Result<Vec<f64>> {
        if let Err(diags) = graph.validate() {
            return Err(Error::InvalidGraph {
                id: graph.id.clone(),
                reason: diags.iter().map(ToString::to_string).collect::<Vec<_>>().join("; "),
            });
        }
        if !graph.is_symmetric() {
            return Err(Error::InvalidGraph {
                id: graph.id.clone(),
                reason: "edges are not symmetrized".into(),
            });
        }
        let batch = batch_graphs([graph])?;
        self.predict_batch(&batch, params)
    }

    /// Mean squared error of task `t` over the batch.
    pub fn per_task_loss(&self, batch: &GraphBatch, params: &ParamSet, task: usize) -> Result<f64> {
        self.loss(batch, params, LossTarget::Task(task))
    }

    /// Sum of the per-task losses with unit weights.
    pub fn total_loss(&self, batch: &GraphBatch, params: &ParamSet) -> Result<f64> {
        self.loss(batch, params, LossTarget::Total)
    }

    pub fn loss(&self, batch: &GraphBatch, params: &ParamSet, target: LossTarget) -> Result<f64> {
        let obj = self.objective(batch, target)?;
        let v = autodiff::evaluate(&obj, params)?;
        Ok(v.data()[0])
    }

    pub fn objective<'a>(&'a self, batch: &'a GraphBatch, target: LossTarget) -> Result<LossObjective<'a>> {
        if let LossTarget::Task(t) = target {
            if t >= self.config.task_count {
                return Err(Error::InvalidArgument(format!(
                    "task {t} out of range for {} tasks",
                    self.config.task_count
                )));
            }
        }
        Ok(LossObjective {
            model: self,
            batch,
            target,
            denominator: batch.graph_count() as f64,
        })
    }

    fn task_loss<S: Scalar>(
        &self,
        tape: &mut Tape<S>,
        p: &[Var],
        batch: &GraphBatch,
        encoding: Var,
        task: usize,
        denominator: f64,
    ) -> Result<Var> {
        let pred = self.head(tape, p, task, encoding)?;
        let y = tape.constant(Tensor::from_parts(
            vec![batch.graph_count(), 1],
            batch.task_targets(task).into_iter().map(S::from_f64).collect(),
        ));
        let r = tape.sub(pred, y)?;
        let sq = tape.square(r);
        let s = tape.sum(sq);
        Ok(tape.scale(s, 1.0 / denominator))
    }
}

/// Squared-error loss over a batch, as a differentiable objective.
pub struct LossObjective<'a> {
    model: &'a GnModel,
    batch: &'a GraphBatch,
    target: LossTarget,
    denominator: f64,
}

impl LossObjective<'_> {
    /// Divides the summed squared error by `denominator` instead of the batch
    /// size; used when a minibatch is split into chunks.
    pub fn with_denominator(mut self, denominator: f64) -> Self {
        self.denominator = denominator;
        self
    }

    pub fn target(&self) -> LossTarget {
        self.target
    }
}

impl Objective for LossObjective<'_> {
    fn eval<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var]) -> Result<Var> {
        let m = self.model;
        let u = m.encode(tape, p, self.batch)?;
        match self.target {
            LossTarget::Task(t) => m.task_loss(tape, p, self.batch, u, t, self.denominator),
            LossTarget::Total => {
                let mut total = m.task_loss(tape, p, self.batch, u, 0, self.denominator)?;
                for t in 1..m.config.task_count {
                    let l = m.task_loss(tape, p, self.batch, u, t, self.denominator)?;
                    total = tape.add(total, l)?;
                }
                Ok(total)
            }
        }
    }
}

/// All heads' predictions, `graphs × tasks`.
struct Predictions<'a> {
    model: &'a GnModel,
    batch: &'a GraphBatch,
}

impl Objective for Predictions<'_> {
    fn eval<S: Scalar>(&self, tape: &mut Tape<S>, p: &[Var]) -> Result<Var> {
        let u = self.model.encode(tape, p, self.batch)?;
        let cols = (0..self.model.config.task_count)
            .map(|t| self.model.head(tape, p, t, u))
            .collect::<Result<Vec<_>>>()?;
        tape.concat(&cols)
    }
}

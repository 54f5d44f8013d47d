//! Define-by-run computation tape with a reverse sweep.
//!
//! Nodes are appended in evaluation order, so the node list is already a
//! topological order and the reverse sweep simply walks it backwards. Every
//! backward rule is written against the generic [`Scalar`], which is what
//! lets the same sweep run on dual numbers for Hessian-vector products.

use std::sync::Arc;

use super::scalar::Scalar;
use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Variance floor inside the layer-norm square root.
pub const LAYER_NORM_EPS: f64 = 1e-6;

/// Handle to a node on a [`Tape`].
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct Var(usize);

impl Var {
    pub fn index(self) -> usize {
        self.0
    }
}

#[derive(Clone, Debug)]
enum Op {
    Leaf,
    MatMul(Var, Var),
    Add(Var, Var),
    Sub(Var, Var),
    Mul(Var, Var),
    AddRow(Var, Var),
    MulRow(Var, Var),
    Tanh(Var),
    Square(Var),
    Concat(Vec<Var>),
    Gather(Var, Arc<[usize]>),
    SegmentSum(Var, Arc<[usize]>),
    LayerNorm(Var),
    Sum(Var),
    Mean(Var),
    Scale(Var, f64),
    Reshape(Var),
    Abs,
}

struct Node<S> {
    op: Op,
    value: Tensor<S>,
    requires_grad: bool,
}

/// A single evaluation context. Build it, read values, optionally sweep back.
pub struct Tape<S: Scalar = f64> {
    nodes: Vec<Node<S>>,
}

impl<S: Scalar> Default for Tape<S> {
    fn default() -> Self {
        Self::new()
    }
}

fn shape_err(op: &str, a: &[usize], b: &[usize]) -> Error {
    Error::Shape(format!("{op}: {a:?} vs {b:?}"))
}

impl<S: Scalar> Tape<S> {
    pub fn new() -> Self {
        Tape { nodes: Vec::new() }
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    pub fn value(&self, v: Var) -> &Tensor<S> {
        &self.nodes[v.0].value
    }

    pub fn shape(&self, v: Var) -> &[usize] {
        self.nodes[v.0].value.shape()
    }

    pub fn requires_grad(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    fn push(&mut self, op: Op, value: Tensor<S>, requires_grad: bool) -> Var {
        self.nodes.push(Node {
            op,
            value,
            requires_grad,
        });
        Var(self.nodes.len() - 1)
    }

    fn rg(&self, vars: &[Var]) -> bool {
        vars.iter().any(|v| self.nodes[v.0].requires_grad)
    }

    /// A leaf that participates in differentiation.
    pub fn param(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Leaf, value, true)
    }

    /// A leaf treated as constant.
    pub fn constant(&mut self, value: Tensor<S>) -> Var {
        self.push(Op::Leaf, value, false)
    }

    fn rank2(&self, v: Var, op: &str) -> Result<(usize, usize)> {
        let s = self.shape(v);
        if s.len() != 2 {
            return Err(Error::Shape(format!("{op}: expected a matrix, got {s:?}")));
        }
        Ok((s[0], s[1]))
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Result<Var> {
        let (m, k) = self.rank2(a, "matmul")?;
        let (k2, n) = self.rank2(b, "matmul")?;
        if k != k2 {
            return Err(shape_err("matmul", self.shape(a), self.shape(b)));
        }
        let mut out = vec![S::zero(); m * n];
        S::gemm_acc(
            m,
            k,
            n,
            self.value(a).data(),
            (k, 1),
            self.value(b).data(),
            (n, 1),
            &mut out,
        );
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::MatMul(a, b), Tensor::from_parts(vec![m, n], out), rg))
    }

    fn zip_same(&mut self, a: Var, b: Var, name: &str, f: impl Fn(S, S) -> S) -> Result<Tensor<S>> {
        let (ta, tb) = (self.value(a), self.value(b));
        if ta.shape() != tb.shape() {
            return Err(shape_err(name, ta.shape(), tb.shape()));
        }
        let data = ta
            .data()
            .iter()
            .zip(tb.data())
            .map(|(&x, &y)| f(x, y))
            .collect();
        Ok(Tensor::from_parts(ta.shape().to_vec(), data))
    }

    pub fn add(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "add", |x, y| x + y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Add(a, b), t, rg))
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "sub", |x, y| x - y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Sub(a, b), t, rg))
    }

    /// Elementwise product.
    pub fn mul(&mut self, a: Var, b: Var) -> Result<Var> {
        let t = self.zip_same(a, b, "mul", |x, y| x * y)?;
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::Mul(a, b), t, rg))
    }

    fn row_broadcast(&self, a: Var, b: Var, name: &str) -> Result<(usize, usize)> {
        let (r, c) = self.rank2(a, name)?;
        let sb = self.shape(b);
        if sb != [c] {
            return Err(shape_err(name, self.shape(a), sb));
        }
        Ok((r, c))
    }

    /// `a[r, c] + b[c]` broadcast over rows.
    pub fn add_row(&mut self, a: Var, b: Var) -> Result<Var> {
        let (_, c) = self.row_broadcast(a, b, "add_row")?;
        let bv = self.value(b).data();
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x + bv[i % c])
            .collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        let rg = self.rg(&[a, b]);
        Ok(self.push(Op::AddRow(a, b), t, rg))
    }

    /// `a[r, c] * g[c]` broadcast over rows.
    pub fn mul_row(&mut self, a: Var, g: Var) -> Result<Var> {
        let (_, c) = self.row_broadcast(a, g, "mul_row")?;
        let gv = self.value(g).data();
        let ta = self.value(a);
        let data = ta
            .data()
            .iter()
            .enumerate()
            .map(|(i, &x)| x * gv[i % c])
            .collect();
        let t = Tensor::from_parts(ta.shape().to_vec(), data);
        let rg = self.rg(&[a, g]);
        Ok(self.push(Op::MulRow(a, g), t, rg))
    }

    pub fn tanh(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.tanh());
        let rg = self.rg(&[a]);
        self.push(Op::Tanh(a), t, rg)
    }

    pub fn square(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x * x);
        let rg = self.rg(&[a]);
        self.push(Op::Square(a), t, rg)
    }

    pub fn scale(&mut self, a: Var, f: f64) -> Var {
        let t = self.value(a).map(|x| x.scale(f));
        let rg = self.rg(&[a]);
        self.push(Op::Scale(a, f), t, rg)
    }

    /// Elementwise absolute value. Forward only: differentiating through it is an error.
    pub fn abs(&mut self, a: Var) -> Var {
        let t = self.value(a).map(|x| x.abs());
        let rg = self.rg(&[a]);
        self.push(Op::Abs, t, rg)
    }

    pub fn reshape(&mut self, a: Var, shape: Vec<usize>) -> Result<Var> {
        let n: usize = shape.iter().product();
        if n != self.value(a).len() {
            return Err(shape_err("reshape", self.shape(a), &shape));
        }
        let t = self.value(a).clone().reshaped(shape);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Reshape(a), t, rg))
    }

    /// Concatenates matrices with equal row counts along the column axis.
    pub fn concat(&mut self, parts: &[Var]) -> Result<Var> {
        if parts.is_empty() {
            return Err(Error::Shape("concat of nothing".into()));
        }
        let rows = self.rank2(parts[0], "concat")?.0;
        let mut widths = Vec::with_capacity(parts.len());
        for &p in parts {
            let (r, c) = self.rank2(p, "concat")?;
            if r != rows {
                return Err(shape_err("concat", self.shape(parts[0]), self.shape(p)));
            }
            widths.push(c);
        }
        let total: usize = widths.iter().sum();
        let mut data = Vec::with_capacity(rows * total);
        for i in 0..rows {
            for (&p, &w) in parts.iter().zip(&widths) {
                data.extend_from_slice(&self.value(p).data()[i * w..(i + 1) * w]);
            }
        }
        let rg = self.rg(parts);
        Ok(self.push(
            Op::Concat(parts.to_vec()),
            Tensor::from_parts(vec![rows, total], data),
            rg,
        ))
    }

    /// Row gather: `out[i] = a[index[i]]`.
    pub fn gather(&mut self, a: Var, index: Arc<[usize]>) -> Result<Var> {
        let (n, c) = self.rank2(a, "gather")?;
        if let Some(&bad) = index.iter().find(|&&i| i >= n) {
            return Err(Error::Shape(format!("gather index {bad} out of range {n}")));
        }
        let src = self.value(a).data();
        let mut data = Vec::with_capacity(index.len() * c);
        for &i in index.iter() {
            data.extend_from_slice(&src[i * c..(i + 1) * c]);
        }
        let t = Tensor::from_parts(vec![index.len(), c], data);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Gather(a, index), t, rg))
    }

    /// Row scatter-sum: `out[segment[i]] += a[i]`, with `segments` output rows.
    pub fn segment_sum(&mut self, a: Var, segment: Arc<[usize]>, segments: usize) -> Result<Var> {
        let (n, c) = self.rank2(a, "segment_sum")?;
        if segment.len() != n {
            return Err(Error::Length {
                expected: n,
                got: segment.len(),
            });
        }
        if let Some(&bad) = segment.iter().find(|&&s| s >= segments) {
            return Err(Error::Shape(format!(
                "segment id {bad} out of range {segments}"
            )));
        }
        let src = self.value(a).data();
        let mut data = vec![S::zero(); segments * c];
        for (i, &s) in segment.iter().enumerate() {
            for j in 0..c {
                data[s * c + j] += src[i * c + j];
            }
        }
        let t = Tensor::from_parts(vec![segments, c], data);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::SegmentSum(a, segment), t, rg))
    }

    /// Per-row normalization to zero mean and unit variance (no affine part).
    pub fn layer_norm(&mut self, a: Var) -> Result<Var> {
        let (r, c) = self.rank2(a, "layer_norm")?;
        let x = self.value(a).data();
        let mut data = Vec::with_capacity(r * c);
        for i in 0..r {
            let row = &x[i * c..(i + 1) * c];
            let (mu, inv) = row_moments(row);
            data.extend(row.iter().map(|&v| (v - mu) * inv));
        }
        let t = Tensor::from_parts(vec![r, c], data);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::LayerNorm(a), t, rg))
    }

    pub fn sum(&mut self, a: Var) -> Var {
        let s = self
            .value(a)
            .data()
            .iter()
            .fold(S::zero(), |acc, &v| acc + v);
        let rg = self.rg(&[a]);
        self.push(Op::Sum(a), Tensor::scalar(s), rg)
    }

    pub fn mean(&mut self, a: Var) -> Result<Var> {
        let n = self.value(a).len();
        if n == 0 {
            return Err(Error::Shape("mean of empty tensor".into()));
        }
        let s = self
            .value(a)
            .data()
            .iter()
            .fold(S::zero(), |acc, &v| acc + v);
        let rg = self.rg(&[a]);
        Ok(self.push(Op::Mean(a), Tensor::scalar(s.scale(1.0 / n as f64)), rg))
    }

    /// Reverse sweep from a scalar output. Returns one adjoint per node; leaves
    /// that do not require gradients (and nodes off the differentiable path)
    /// get `None`.
    pub fn backward(&self, output: Var) -> Result<Vec<Option<Tensor<S>>>> {
        let out_val = self.value(output);
        if out_val.len() != 1 {
            return Err(Error::NonScalarLoss(out_val.shape().to_vec()));
        }
        let mut adj: Vec<Option<Tensor<S>>> = (0..self.nodes.len()).map(|_| None).collect();
        if !self.nodes[output.0].requires_grad {
            return Ok(adj);
        }
        adj[output.0] = Some(Tensor::filled(out_val.shape().to_vec(), S::one()));

        for idx in (0..=output.0).rev() {
            let node = &self.nodes[idx];
            if !node.requires_grad {
                continue;
            }
            if matches!(node.op, Op::Leaf) {
                continue;
            }
            let Some(g) = adj[idx].take() else { continue };
            self.propagate(idx, &g, &mut adj)?;
            adj[idx] = Some(g);
        }
        Ok(adj)
    }

    fn accumulate(&self, adj: &mut [Option<Tensor<S>>], v: Var, contrib: Tensor<S>) {
        if !self.nodes[v.0].requires_grad {
            return;
        }
        match &mut adj[v.0] {
            Some(t) => t.add_assign(&contrib),
            slot @ None => *slot = Some(contrib),
        }
    }

    fn propagate(&self, idx: usize, g: &Tensor<S>, adj: &mut [Option<Tensor<S>>]) -> Result<()> {
        let node = &self.nodes[idx];
        let gd = g.data();
        match &node.op {
            Op::Leaf => {}
            Op::MatMul(a, b) => {
                let (m, k) = (self.shape(*a)[0], self.shape(*a)[1]);
                let n = self.shape(*b)[1];
                if self.requires_grad(*a) {
                    // dA = dC · Bᵀ
                    let mut da = vec![S::zero(); m * k];
                    S::gemm_acc(m, n, k, gd, (n, 1), self.value(*b).data(), (1, n), &mut da);
                    self.accumulate(adj, *a, Tensor::from_parts(vec![m, k], da));
                }
                if self.requires_grad(*b) {
                    // dB = Aᵀ · dC
                    let mut db = vec![S::zero(); k * n];
                    S::gemm_acc(k, m, n, self.value(*a).data(), (1, k), gd, (n, 1), &mut db);
                    self.accumulate(adj, *b, Tensor::from_parts(vec![k, n], db));
                }
            }
            Op::Add(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(adj, *a, g.clone());
                self.accumulate(adj, *b, g.map(|x| -x));
            }
            Op::Mul(a, b) => {
                let (va, vb) = (self.value(*a).data(), self.value(*b).data());
                if self.requires_grad(*a) {
                    let d = gd.iter().zip(vb).map(|(&x, &y)| x * y).collect();
                    self.accumulate(adj, *a, Tensor::from_parts(g.shape().to_vec(), d));
                }
                if self.requires_grad(*b) {
                    let d = gd.iter().zip(va).map(|(&x, &y)| x * y).collect();
                    self.accumulate(adj, *b, Tensor::from_parts(g.shape().to_vec(), d));
                }
            }
            Op::AddRow(a, b) => {
                self.accumulate(adj, *a, g.clone());
                if self.requires_grad(*b) {
                    let c = self.shape(*b)[0];
                    self.accumulate(adj, *b, Tensor::from_parts(vec![c], column_sums(gd, c)));
                }
            }
            Op::MulRow(a, w) => {
                let c = self.shape(*w)[0];
                let wv = self.value(*w).data();
                if self.requires_grad(*a) {
                    let d = gd.iter().enumerate().map(|(i, &x)| x * wv[i % c]).collect();
                    self.accumulate(adj, *a, Tensor::from_parts(g.shape().to_vec(), d));
                }
                if self.requires_grad(*w) {
                    let av = self.value(*a).data();
                    let prod: Vec<S> = gd.iter().zip(av).map(|(&x, &y)| x * y).collect();
                    self.accumulate(adj, *w, Tensor::from_parts(vec![c], column_sums(&prod, c)));
                }
            }
            Op::Tanh(a) => {
                let y = node.value.data();
                let d = gd
                    .iter()
                    .zip(y)
                    .map(|(&x, &t)| x * (S::one() - t * t))
                    .collect();
                self.accumulate(adj, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::Square(a) => {
                let va = self.value(*a).data();
                let d = gd
                    .iter()
                    .zip(va)
                    .map(|(&x, &v)| x * v.scale(2.0))
                    .collect();
                self.accumulate(adj, *a, Tensor::from_parts(g.shape().to_vec(), d));
            }
            Op::Scale(a, f) => {
                self.accumulate(adj, *a, g.map(|x| x.scale(*f)));
            }
            Op::Reshape(a) => {
                let shape = self.shape(*a).to_vec();
                self.accumulate(adj, *a, g.clone().reshaped(shape));
            }
            Op::Abs => return Err(Error::NonDifferentiable("abs")),
            Op::Concat(parts) => {
                let rows = g.rows();
                let total = g.cols();
                let mut offset = 0;
                for &p in parts {
                    let w = self.shape(p)[1];
                    if self.requires_grad(p) {
                        let mut d = Vec::with_capacity(rows * w);
                        for i in 0..rows {
                            d.extend_from_slice(&gd[i * total + offset..i * total + offset + w]);
                        }
                        self.accumulate(adj, p, Tensor::from_parts(vec![rows, w], d));
                    }
                    offset += w;
                }
            }
            Op::Gather(a, index) => {
                let (n, c) = (self.shape(*a)[0], self.shape(*a)[1]);
                let mut d = vec![S::zero(); n * c];
                for (i, &src) in index.iter().enumerate() {
                    for j in 0..c {
                        d[src * c + j] += gd[i * c + j];
                    }
                }
                self.accumulate(adj, *a, Tensor::from_parts(vec![n, c], d));
            }
            Op::SegmentSum(a, segment) => {
                let c = self.shape(*a)[1];
                let mut d = Vec::with_capacity(segment.len() * c);
                for &s in segment.iter() {
                    d.extend_from_slice(&gd[s * c..(s + 1) * c]);
                }
                self.accumulate(adj, *a, Tensor::from_parts(vec![segment.len(), c], d));
            }
            Op::LayerNorm(a) => {
                let (r, c) = (self.shape(*a)[0], self.shape(*a)[1]);
                let x = self.value(*a).data();
                let y = node.value.data();
                let inv_c = 1.0 / c as f64;
                let mut d = Vec::with_capacity(r * c);
                for i in 0..r {
                    let (_, inv) = row_moments(&x[i * c..(i + 1) * c]);
                    let gy = &gd[i * c..(i + 1) * c];
                    let yr = &y[i * c..(i + 1) * c];
                    let mean_g = gy.iter().fold(S::zero(), |s, &v| s + v).scale(inv_c);
                    let mean_gy = gy
                        .iter()
                        .zip(yr)
                        .fold(S::zero(), |s, (&a, &b)| s + a * b)
                        .scale(inv_c);
                    d.extend(
                        gy.iter()
                            .zip(yr)
                            .map(|(&gv, &yv)| inv * (gv - mean_g - yv * mean_gy)),
                    );
                }
                self.accumulate(adj, *a, Tensor::from_parts(vec![r, c], d));
            }
            Op::Sum(a) => {
                let shape = self.shape(*a).to_vec();
                self.accumulate(adj, *a, Tensor::filled(shape, gd[0]));
            }
            Op::Mean(a) => {
                let shape = self.shape(*a).to_vec();
                let n = self.value(*a).len() as f64;
                self.accumulate(adj, *a, Tensor::filled(shape, gd[0].scale(1.0 / n)));
            }
        }
        Ok(())
    }
}

/// Row mean and `1/sqrt(var + eps)` with the population variance.
fn row_moments<S: Scalar>(row: &[S]) -> (S, S) {
    let inv_c = 1.0 / row.len() as f64;
    let mu = row.iter().fold(S::zero(), |s, &v| s + v).scale(inv_c);
    let var = row
        .iter()
        .fold(S::zero(), |s, &v| {
            let d = v - mu;
            s + d * d
        })
        .scale(inv_c);
    let inv = S::one() / (var + S::from_f64(LAYER_NORM_EPS)).sqrt();
    (mu, inv)
}

fn column_sums<S: Scalar>(data: &[S], cols: usize) -> Vec<S> {
    let mut out = vec![S::zero(); cols];
    for (i, &v) in data.iter().enumerate() {
        out[i % cols] += v;
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    fn mat(r: usize, c: usize, d: &[f64]) -> Tensor {
        Tensor::matrix(r, c, d.to_vec()).unwrap()
    }

    #[test]
    fn matmul_forward_and_backward() {
        let mut t = Tape::<f64>::new();
        let a = t.param(mat(2, 2, &[1.0, 2.0, 3.0, 4.0]));
        let b = t.param(mat(2, 1, &[5.0, 6.0]));
        let c = t.matmul(a, b).unwrap();
        assert_eq!(t.value(c).data(), &[17.0, 39.0]);
        let s = t.sum(c);
        let adj = t.backward(s).unwrap();
        // d/dA sum(AB) = 1·Bᵀ per row, d/dB = colsum(A)
        assert_eq!(adj[a.index()].as_ref().unwrap().data(), &[5.0, 6.0, 5.0, 6.0]);
        assert_eq!(adj[b.index()].as_ref().unwrap().data(), &[4.0, 6.0]);
    }

    #[test]
    fn constants_get_no_adjoint() {
        let mut t = Tape::<f64>::new();
        let x = t.constant(mat(1, 2, &[1.0, 2.0]));
        let w = t.param(mat(2, 1, &[1.0, 1.0]));
        let y = t.matmul(x, w).unwrap();
        let s = t.sum(y);
        let adj = t.backward(s).unwrap();
        assert!(adj[x.index()].is_none());
        assert_eq!(adj[w.index()].as_ref().unwrap().data(), &[1.0, 2.0]);
    }

    #[test]
    fn non_scalar_output_is_rejected() {
        let mut t = Tape::<f64>::new();
        let x = t.param(mat(1, 2, &[1.0, 2.0]));
        let y = t.tanh(x);
        assert!(matches!(t.backward(y), Err(Error::NonScalarLoss(_))));
    }

    #[test]
    fn abs_is_not_differentiable() {
        let mut t = Tape::<f64>::new();
        let x = t.param(mat(1, 2, &[-1.0, 2.0]));
        let y = t.abs(x);
        assert_eq!(t.value(y).data(), &[1.0, 2.0]);
        let s = t.sum(y);
        assert!(matches!(t.backward(s), Err(Error::NonDifferentiable(_))));
    }

    #[test]
    fn gather_and_segment_sum_are_adjoint() {
        let mut t = Tape::<f64>::new();
        let x = t.param(mat(3, 1, &[1.0, 2.0, 3.0]));
        let idx: Arc<[usize]> = Arc::from(vec![2, 0, 2]);
        let g = t.gather(x, idx.clone()).unwrap();
        assert_eq!(t.value(g).data(), &[3.0, 1.0, 3.0]);
        let s = t.segment_sum(g, idx, 3).unwrap();
        assert_eq!(t.value(s).data(), &[1.0, 0.0, 6.0]);
        let total = t.sum(s);
        let adj = t.backward(total).unwrap();
        assert_eq!(adj[x.index()].as_ref().unwrap().data(), &[1.0, 0.0, 2.0]);
    }

    #[test]
    fn empty_segments_sum_to_zero() {
        let mut t = Tape::<f64>::new();
        let e = t.param(Tensor::zeros(vec![0, 2]));
        let s = t.segment_sum(e, Arc::from(Vec::<usize>::new()), 2).unwrap();
        assert_eq!(t.value(s).data(), &[0.0; 4]);
    }

    #[test]
    fn layer_norm_rows_are_standardized() {
        let mut t = Tape::<f64>::new();
        let x = t.param(mat(2, 3, &[1.0, 2.0, 3.0, -4.0, 0.0, 10.0]));
        let y = t.layer_norm(x).unwrap();
        for row in t.value(y).data().chunks(3) {
            let mean: f64 = row.iter().sum::<f64>() / 3.0;
            let var: f64 = row.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / 3.0;
            assert!(mean.abs() < 1e-12);
            assert!((var - 1.0).abs() < 1e-5);
        }
    }
}

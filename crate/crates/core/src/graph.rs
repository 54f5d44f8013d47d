//! Directed multigraphs with node/edge features and per-graph targets, and
//! offset-based batching.

use std::collections::HashMap;
use std::fmt;
use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One directed edge `(src, dst, key)`; `key` distinguishes parallel edges.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Edge {
    pub src: usize,
    pub dst: usize,
    pub key: usize,
    pub feat: Vec<f64>,
}

/// A graph record. Field names match the JSONL dataset format.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Multigraph {
    pub id: String,
    /// One feature row per node.
    pub nodes: Vec<Vec<f64>>,
    pub edges: Vec<Edge>,
    pub targets: Vec<f64>,
}

/// A single invariant violation found by [`validate_graph`].
#[derive(Clone, Debug, PartialEq)]
pub enum Diagnostic {
    NodeWidth { node: usize, expected: usize, got: usize },
    EdgeWidth { edge: usize, expected: usize, got: usize },
    IndexOutOfRange { edge: usize, index: usize, nodes: usize },
    DuplicateKey { src: usize, dst: usize, key: usize },
    NonFiniteNode { node: usize },
    NonFiniteEdge { edge: usize },
    NonFiniteTarget { task: usize },
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Diagnostic::NodeWidth { node, expected, got } => {
                write!(f, "node {node}: feature width {got}, expected {expected}")
            }
            Diagnostic::EdgeWidth { edge, expected, got } => {
                write!(f, "edge {edge}: feature width {got}, expected {expected}")
            }
            Diagnostic::IndexOutOfRange { edge, index, nodes } => {
                write!(f, "edge {edge}: index out of range ({index} >= {nodes})")
            }
            Diagnostic::DuplicateKey { src, dst, key } => {
                write!(f, "duplicate multi-edge key ({src}, {dst}, {key})")
            }
            Diagnostic::NonFiniteNode { node } => write!(f, "node {node}: non-finite feature"),
            Diagnostic::NonFiniteEdge { edge } => write!(f, "edge {edge}: non-finite feature"),
            Diagnostic::NonFiniteTarget { task } => write!(f, "target {task}: non-finite"),
        }
    }
}

impl Multigraph {
    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Node feature width (0 for an empty graph).
    pub fn node_dim(&self) -> usize {
        self.nodes.first().map_or(0, Vec::len)
    }

    /// Edge feature width, if the graph has edges.
    pub fn edge_dim(&self) -> Option<usize> {
        self.edges.first().map(|e| e.feat.len())
    }

    pub fn task_count(&self) -> usize {
        self.targets.len()
    }

    /// Checks every graph invariant and collects the violations.
    pub fn validate(&self) -> std::result::Result<(), Vec<Diagnostic>> {
        validate_graph(self)
    }

    /// Relabels nodes so that old node `i` becomes `perm[i]`.
    pub fn permute_nodes(&self, perm: &[usize]) -> Result<Multigraph> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        if perm.len() != n || perm.iter().any(|&p| p >= n || std::mem::replace(&mut seen[p], true)) {
            return Err(Error::InvalidArgument("not a permutation".into()));
        }
        let mut nodes = vec![Vec::new(); n];
        for (i, row) in self.nodes.iter().enumerate() {
            nodes[perm[i]] = row.clone();
        }
        let edges = self
            .edges
            .iter()
            .map(|e| Edge {
                src: perm[e.src],
                dst: perm[e.dst],
                key: e.key,
                feat: e.feat.clone(),
            })
            .collect();
        Ok(Multigraph {
            id: self.id.clone(),
            nodes,
            edges,
            targets: self.targets.clone(),
        })
    }

    /// True when every edge has its reverse with the same key and features.
    pub fn is_symmetric(&self) -> bool {
        let index = edge_index(&self.edges);
        self.edges.iter().all(|e| {
            index
                .get(&(e.dst, e.src, e.key))
                .is_some_and(|&j| self.edges[j].feat == e.feat)
        })
    }
}

fn edge_index(edges: &[Edge]) -> HashMap<(usize, usize, usize), usize> {
    edges
        .iter()
        .enumerate()
        .map(|(i, e)| ((e.src, e.dst, e.key), i))
        .collect()
}

/// Returns `Ok(())` iff all invariants hold; otherwise every violation found.
pub fn validate_graph(g: &Multigraph) -> std::result::Result<(), Vec<Diagnostic>> {
    let mut diags = Vec::new();
    let n = g.node_count();
    let v = g.node_dim();
    for (i, row) in g.nodes.iter().enumerate() {
        if row.len() != v {
            diags.push(Diagnostic::NodeWidth {
                node: i,
                expected: v,
                got: row.len(),
            });
        }
        if row.iter().any(|x| !x.is_finite()) {
            diags.push(Diagnostic::NonFiniteNode { node: i });
        }
    }
    let e_dim = g.edge_dim().unwrap_or(0);
    let mut seen = HashMap::new();
    for (i, e) in g.edges.iter().enumerate() {
        for index in [e.src, e.dst] {
            if index >= n {
                diags.push(Diagnostic::IndexOutOfRange {
                    edge: i,
                    index,
                    nodes: n,
                });
            }
        }
        if seen.insert((e.src, e.dst, e.key), i).is_some() {
            diags.push(Diagnostic::DuplicateKey {
                src: e.src,
                dst: e.dst,
                key: e.key,
            });
        }
        if e.feat.len() != e_dim {
            diags.push(Diagnostic::EdgeWidth {
                edge: i,
                expected: e_dim,
                got: e.feat.len(),
            });
        }
        if e.feat.iter().any(|x| !x.is_finite()) {
            diags.push(Diagnostic::NonFiniteEdge { edge: i });
        }
    }
    for (t, y) in g.targets.iter().enumerate() {
        if !y.is_finite() {
            diags.push(Diagnostic::NonFiniteTarget { task: t });
        }
    }
    if diags.is_empty() {
        Ok(())
    } else {
        Err(diags)
    }
}

/// Adds the reverse `(dst, src, key)` of every edge that lacks one, with the
/// same features. Idempotent.
pub fn symmetrize_edges(g: &Multigraph) -> Result<Multigraph> {
    let index = edge_index(&g.edges);
    let mut out = g.clone();
    for e in &g.edges {
        match index.get(&(e.dst, e.src, e.key)) {
            Some(&j) => {
                if g.edges[j].feat != e.feat {
                    return Err(Error::AsymmetricDuplicate {
                        src: e.src,
                        dst: e.dst,
                        key: e.key,
                    });
                }
            }
            None => out.edges.push(Edge {
                src: e.dst,
                dst: e.src,
                key: e.key,
                feat: e.feat.clone(),
            }),
        }
    }
    Ok(out)
}

/// Several graphs packed into flat node/edge arrays with index offsets.
#[derive(Clone, Debug, PartialEq)]
pub struct GraphBatch {
    pub ids: Vec<String>,
    /// Row-major `total_nodes × node_dim`.
    pub node_features: Vec<f64>,
    /// Row-major `total_edges × edge_dim`.
    pub edge_features: Vec<f64>,
    pub node_dim: usize,
    /// Width of edge features; 0 when the batch carries no edges.
    pub edge_dim: usize,
    pub task_count: usize,
    /// Batch-global source node of each edge.
    pub edge_src: Arc<[usize]>,
    /// Batch-global destination node of each edge.
    pub edge_dst: Arc<[usize]>,
    pub edge_keys: Vec<usize>,
    /// Graph index of each node.
    pub node_graph: Arc<[usize]>,
    /// Graph index of each edge.
    pub edge_graph: Arc<[usize]>,
    node_starts: Vec<usize>,
    edge_starts: Vec<usize>,
    /// Row-major `graphs × task_count`.
    pub targets: Vec<f64>,
}

impl GraphBatch {
    pub fn graph_count(&self) -> usize {
        self.ids.len()
    }

    pub fn total_nodes(&self) -> usize {
        self.node_graph.len()
    }

    pub fn total_edges(&self) -> usize {
        self.edge_graph.len()
    }

    /// First batch-global node index of each graph.
    pub fn node_offsets(&self) -> &[usize] {
        &self.node_starts[..self.graph_count()]
    }

    pub fn edge_offsets(&self) -> &[usize] {
        &self.edge_starts[..self.graph_count()]
    }

    pub fn target(&self, graph: usize, task: usize) -> f64 {
        self.targets[graph * self.task_count + task]
    }

    /// Targets of one task across the batch.
    pub fn task_targets(&self, task: usize) -> Vec<f64> {
        (0..self.graph_count()).map(|g| self.target(g, task)).collect()
    }

    /// Exact inverse of [`batch_graphs`].
    pub fn unbatch(&self) -> Vec<Multigraph> {
        (0..self.graph_count())
            .map(|gi| {
                let (n0, n1) = (self.node_starts[gi], self.node_starts[gi + 1]);
                let (e0, e1) = (self.edge_starts[gi], self.edge_starts[gi + 1]);
                let nodes = (n0..n1)
                    .map(|i| self.node_features[i * self.node_dim..(i + 1) * self.node_dim].to_vec())
                    .collect();
                let edges = (e0..e1)
                    .map(|i| Edge {
                        src: self.edge_src[i] - n0,
                        dst: self.edge_dst[i] - n0,
                        key: self.edge_keys[i],
                        feat: self.edge_features[i * self.edge_dim..(i + 1) * self.edge_dim].to_vec(),
                    })
                    .collect();
                Multigraph {
                    id: self.ids[gi].clone(),
                    nodes,
                    edges,
                    targets: self.targets[gi * self.task_count..(gi + 1) * self.task_count].to_vec(),
                }
            })
            .collect()
    }
}

/// Packs graphs with uniform node/edge/target widths into one batch.
pub fn batch_graphs<'a, I>(graphs: I) -> Result<GraphBatch>
where
    I: IntoIterator<Item = &'a Multigraph>,
{
    let graphs: Vec<&Multigraph> = graphs.into_iter().collect();
    let first = *graphs
        .first()
        .ok_or_else(|| Error::InvalidArgument("cannot batch an empty list".into()))?;
    let node_dim = first.node_dim();
    let task_count = first.task_count();
    let edge_dim = graphs.iter().find_map(|g| g.edge_dim()).unwrap_or(0);

    let total_nodes: usize = graphs.iter().map(|g| g.node_count()).sum();
    let total_edges: usize = graphs.iter().map(|g| g.edge_count()).sum();
    let mut b = GraphBatch {
        ids: Vec::with_capacity(graphs.len()),
        node_features: Vec::with_capacity(total_nodes * node_dim),
        edge_features: Vec::with_capacity(total_edges * edge_dim),
        node_dim,
        edge_dim,
        task_count,
        edge_src: Arc::from(Vec::new()),
        edge_dst: Arc::from(Vec::new()),
        edge_keys: Vec::with_capacity(total_edges),
        node_graph: Arc::from(Vec::new()),
        edge_graph: Arc::from(Vec::new()),
        node_starts: Vec::with_capacity(graphs.len() + 1),
        edge_starts: Vec::with_capacity(graphs.len() + 1),
        targets: Vec::with_capacity(graphs.len() * task_count),
    };
    let mut src = Vec::with_capacity(total_edges);
    let mut dst = Vec::with_capacity(total_edges);
    let mut node_graph = Vec::with_capacity(total_nodes);
    let mut edge_graph = Vec::with_capacity(total_edges);
    let mut offset = 0;
    for (gi, g) in graphs.iter().enumerate() {
        let bad = |what: &str| Error::InvalidGraph {
            id: g.id.clone(),
            reason: format!("heterogeneous {what} width in batch"),
        };
        if g.task_count() != task_count {
            return Err(bad("target"));
        }
        if g.nodes.iter().any(|r| r.len() != node_dim) {
            return Err(bad("node feature"));
        }
        if g.edges.iter().any(|e| e.feat.len() != edge_dim) {
            return Err(bad("edge feature"));
        }
        b.ids.push(g.id.clone());
        b.node_starts.push(offset);
        b.edge_starts.push(edge_graph.len());
        for row in &g.nodes {
            b.node_features.extend_from_slice(row);
            node_graph.push(gi);
        }
        for e in &g.edges {
            if e.src >= g.node_count() || e.dst >= g.node_count() {
                return Err(Error::InvalidGraph {
                    id: g.id.clone(),
                    reason: "index out of range".into(),
                });
            }
            src.push(e.src + offset);
            dst.push(e.dst + offset);
            b.edge_keys.push(e.key);
            b.edge_features.extend_from_slice(&e.feat);
            edge_graph.push(gi);
        }
        b.targets.extend_from_slice(&g.targets);
        offset += g.node_count();
    }
    b.node_starts.push(offset);
    b.edge_starts.push(edge_graph.len());
    b.edge_src = Arc::from(src);
    b.edge_dst = Arc::from(dst);
    b.node_graph = Arc::from(node_graph);
    b.edge_graph = Arc::from(edge_graph);
    Ok(b)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn edge(src: usize, dst: usize, key: usize, feat: &[f64]) -> Edge {
        Edge {
            src,
            dst,
            key,
            feat: feat.to_vec(),
        }
    }

    fn graph(n: usize, edges: Vec<Edge>) -> Multigraph {
        Multigraph {
            id: format!("g{n}"),
            nodes: (0..n).map(|i| vec![i as f64, 1.0]).collect(),
            edges,
            targets: vec![0.5, -1.0],
        }
    }

    #[test]
    fn single_node_is_valid() {
        assert!(validate_graph(&graph(1, vec![])).is_ok());
    }

    #[test]
    fn out_of_range_index_reported() {
        let g = graph(3, vec![edge(5, 0, 0, &[1.0])]);
        let diags = validate_graph(&g).unwrap_err();
        assert!(diags.iter().any(|d| d.to_string().contains("index out of range")));
    }

    #[test]
    fn duplicate_key_reported() {
        let g = graph(2, vec![edge(0, 1, 0, &[1.0]), edge(0, 1, 0, &[2.0])]);
        let diags = validate_graph(&g).unwrap_err();
        assert!(diags.iter().any(|d| d.to_string().contains("duplicate multi-edge key")));
    }

    #[test]
    fn nan_target_reported() {
        let mut g = graph(1, vec![]);
        g.targets[1] = f64::NAN;
        assert_eq!(
            validate_graph(&g).unwrap_err(),
            vec![Diagnostic::NonFiniteTarget { task: 1 }]
        );
    }

    #[test]
    fn symmetrize_single_edge() {
        let g = graph(2, vec![edge(0, 1, 0, &[0.25])]);
        let s = symmetrize_edges(&g).unwrap();
        assert_eq!(s.edges, vec![edge(0, 1, 0, &[0.25]), edge(1, 0, 0, &[0.25])]);
        assert!(s.is_symmetric());
        assert_eq!(symmetrize_edges(&s).unwrap(), s);
    }

    #[test]
    fn symmetrize_parallel_edges() {
        let g = graph(2, vec![edge(0, 1, 0, &[1.0]), edge(0, 1, 1, &[2.0])]);
        let s = symmetrize_edges(&g).unwrap();
        let mut got: Vec<_> = s.edges.iter().map(|e| (e.src, e.dst, e.key, e.feat[0])).collect();
        got.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(
            got,
            vec![(0, 1, 0, 1.0), (0, 1, 1, 2.0), (1, 0, 0, 1.0), (1, 0, 1, 2.0)]
        );
    }

    #[test]
    fn symmetrize_rejects_asymmetric_duplicate() {
        let g = graph(2, vec![edge(0, 1, 0, &[1.0]), edge(1, 0, 0, &[2.0])]);
        assert!(matches!(
            symmetrize_edges(&g),
            Err(Error::AsymmetricDuplicate { .. })
        ));
    }

    #[test]
    fn self_loops_are_their_own_reverse() {
        let g = graph(1, vec![edge(0, 0, 0, &[1.0])]);
        assert_eq!(symmetrize_edges(&g).unwrap(), g);
    }

    #[test]
    fn batch_offsets() {
        let a = graph(2, vec![edge(0, 1, 0, &[1.0])]);
        let b = graph(3, vec![edge(2, 0, 0, &[2.0])]);
        let batch = batch_graphs([&a, &b]).unwrap();
        assert_eq!(batch.node_offsets(), &[0, 2]);
        assert_eq!(batch.total_nodes(), 5);
        assert_eq!(&batch.edge_src[..], &[0, 4]);
        assert_eq!(&batch.edge_dst[..], &[1, 2]);
        assert_eq!(batch.unbatch(), vec![a, b]);
    }

    #[test]
    fn batch_of_one_wraps() {
        let a = graph(3, vec![edge(0, 2, 1, &[3.0])]);
        let batch = batch_graphs([&a]).unwrap();
        assert_eq!(batch.graph_count(), 1);
        assert_eq!(batch.unbatch(), vec![a]);
    }

    #[test]
    fn batch_errors() {
        assert!(batch_graphs(std::iter::empty::<&Multigraph>()).is_err());
        let a = graph(2, vec![edge(0, 1, 0, &[1.0])]);
        let b = graph(2, vec![edge(0, 1, 0, &[1.0, 2.0])]);
        assert!(batch_graphs([&a, &b]).is_err());
        let mut c = graph(2, vec![]);
        c.targets.push(0.0);
        assert!(batch_graphs([&a, &c]).is_err());
    }

    #[test]
    fn permutation_maps_edges() {
        let g = graph(3, vec![edge(0, 1, 0, &[1.0])]);
        let p = g.permute_nodes(&[2, 0, 1]).unwrap();
        assert_eq!(p.edges[0].src, 2);
        assert_eq!(p.edges[0].dst, 0);
        assert_eq!(p.nodes[2], g.nodes[0]);
        assert!(p.validate().is_ok());
        assert!(g.permute_nodes(&[0, 0, 1]).is_err());
    }
}

//! Named parameter collections and their flattened views.

use std::ops::Deref;

use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

/// Which part of the model a parameter tensor belongs to.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Block {
    /// Encoder weights shared by every task.
    Shared,
    /// Weights of the head for one task.
    Task(usize),
}

/// Selection of parameters to differentiate or flatten.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum BlockSel {
    Shared,
    Task(usize),
    All,
}

impl BlockSel {
    pub fn contains(self, block: Block) -> bool {
        match (self, block) {
            (BlockSel::All, _) => true,
            (BlockSel::Shared, Block::Shared) => true,
            (BlockSel::Task(t), Block::Task(u)) => t == u,
            _ => false,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ParamEntry {
    pub name: String,
    pub block: Block,
    pub tensor: Tensor,
}

/// Ordered, uniquely named parameter tensors.
///
/// The insertion order is the canonical order used by every flattened view.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ParamSet {
    entries: Vec<ParamEntry>,
}

/// A parameter block laid out as one contiguous vector in canonical order.
#[derive(Clone, Debug, PartialEq)]
pub struct FlatVector(Vec<f64>);

impl FlatVector {
    pub fn new(values: Vec<f64>) -> Self {
        FlatVector(values)
    }

    pub fn zeros(len: usize) -> Self {
        FlatVector(vec![0.0; len])
    }

    pub fn into_inner(self) -> Vec<f64> {
        self.0
    }

    pub fn dot(&self, other: &[f64]) -> f64 {
        dot(&self.0, other)
    }

    pub fn norm(&self) -> f64 {
        self.dot(&self.0).sqrt()
    }
}

impl Deref for FlatVector {
    type Target = [f64];
    fn deref(&self) -> &[f64] {
        &self.0
    }
}

impl From<Vec<f64>> for FlatVector {
    fn from(v: Vec<f64>) -> Self {
        FlatVector(v)
    }
}

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl ParamSet {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn from_entries(entries: Vec<ParamEntry>) -> Result<Self> {
        let mut set = ParamSet::new();
        for e in entries {
            set.push(e.name, e.block, e.tensor)?;
        }
        Ok(set)
    }

    pub fn push(&mut self, name: impl Into<String>, block: Block, tensor: Tensor) -> Result<()> {
        let name = name.into();
        if self.entries.iter().any(|e| e.name == name) {
            return Err(Error::InvalidArgument(format!(
                "duplicate parameter name {name}"
            )));
        }
        if !tensor.all_finite() {
            return Err(Error::NonFinite(format!("parameter {name}")));
        }
        self.entries.push(ParamEntry {
            name,
            block,
            tensor,
        });
        Ok(())
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries(&self) -> &[ParamEntry] {
        &self.entries
    }

    pub fn iter(&self) -> impl Iterator<Item = &ParamEntry> {
        self.entries.iter()
    }

    pub fn index_of(&self, name: &str) -> Option<usize> {
        self.entries.iter().position(|e| e.name == name)
    }

    pub fn get(&self, name: &str) -> Option<&Tensor> {
        self.entries.iter().find(|e| e.name == name).map(|e| &e.tensor)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Tensor> {
        self.entries
            .iter_mut()
            .find(|e| e.name == name)
            .map(|e| &mut e.tensor)
    }

    /// Number of scalars in the selected block.
    pub fn block_len(&self, sel: BlockSel) -> usize {
        self.entries
            .iter()
            .filter(|e| sel.contains(e.block))
            .map(|e| e.tensor.len())
            .sum()
    }

    /// Task indices that own at least one entry, ascending.
    pub fn task_count(&self) -> usize {
        self.entries
            .iter()
            .filter_map(|e| match e.block {
                Block::Task(t) => Some(t + 1),
                Block::Shared => None,
            })
            .max()
            .unwrap_or(0)
    }

    pub fn flatten(&self, sel: BlockSel) -> FlatVector {
        let mut out = Vec::with_capacity(self.block_len(sel));
        for e in self.entries.iter().filter(|e| sel.contains(e.block)) {
            out.extend_from_slice(e.tensor.data());
        }
        FlatVector(out)
    }

    /// Replaces the selected block with values from `flat`, keeping shapes.
    pub fn unflatten(&self, flat: &[f64], sel: BlockSel) -> Result<ParamSet> {
        let expected = self.block_len(sel);
        if flat.len() != expected {
            return Err(Error::Length {
                expected,
                got: flat.len(),
            });
        }
        let mut out = self.clone();
        let mut offset = 0;
        for e in out.entries.iter_mut().filter(|e| sel.contains(e.block)) {
            let n = e.tensor.len();
            e.tensor.data_mut().copy_from_slice(&flat[offset..offset + n]);
            offset += n;
        }
        Ok(out)
    }

    /// Scatters `flat` (laid out over `sel`) onto per-entry slices; entries
    /// outside the block receive `None`.
    pub fn split_flat<'a>(&self, flat: &'a [f64], sel: BlockSel) -> Result<Vec<Option<&'a [f64]>>> {
        let expected = self.block_len(sel);
        if flat.len() != expected {
            return Err(Error::Length {
                expected,
                got: flat.len(),
            });
        }
        let mut offset = 0;
        Ok(self
            .entries
            .iter()
            .map(|e| {
                if sel.contains(e.block) {
                    let n = e.tensor.len();
                    let s = &flat[offset..offset + n];
                    offset += n;
                    Some(s)
                } else {
                    None
                }
            })
            .collect())
    }

    pub fn to_records(&self) -> Vec<ParamRecord> {
        self.entries
            .iter()
            .map(|e| ParamRecord {
                name: e.name.clone(),
                block: e.block,
                shape: e.tensor.shape().to_vec(),
                values: e.tensor.data().to_vec(),
            })
            .collect()
    }

    pub fn from_records(records: Vec<ParamRecord>) -> Result<Self> {
        let mut set = ParamSet::new();
        for r in records {
            let tensor = Tensor::new(r.shape, r.values)?;
            set.push(r.name, r.block, tensor)?;
        }
        Ok(set)
    }

    /// Names in canonical order, for integrity checks after loading.
    pub fn names(&self) -> Vec<&str> {
        self.entries.iter().map(|e| e.name.as_str()).collect()
    }
}

/// Serialized form of one parameter tensor.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ParamRecord {
    pub name: String,
    pub block: Block,
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
}

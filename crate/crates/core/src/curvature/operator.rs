use crate::autodiff::{self, BlockSel, Objective, ParamSet};
use crate::error::{Error, Result};

/// A symmetric linear map `v ↦ H v` that is only available through its action.
///
/// `apply` must be pure and reentrant: probes and Lanczos runs call it from
/// several threads at once.
pub trait CurvatureOperator: Sync {
    fn dim(&self) -> usize;
    fn apply(&self, v: &[f64]) -> Result<Vec<f64>>;
    fn label(&self) -> &str;
}

pub(crate) fn check_len(op: &impl CurvatureOperator, v: &[f64]) -> Result<()> {
    if v.len() != op.dim() {
        return Err(Error::Length {
            expected: op.dim(),
            got: v.len(),
        });
    }
    Ok(())
}

/// Hessian of an objective over one parameter block; everything outside the
/// block is held constant.
pub struct HessianOperator<O> {
    objective: O,
    params: ParamSet,
    block: BlockSel,
    label: String,
    dim: usize,
}

/// Builds the Hessian operator of `objective` over `block` at `params`.
pub fn hessian_operator<O: Objective>(
    objective: O,
    params: &ParamSet,
    block: BlockSel,
    label: impl Into<String>,
) -> HessianOperator<O> {
    HessianOperator {
        dim: params.block_len(block),
        objective,
        params: params.clone(),
        block,
        label: label.into(),
    }
}

impl<O: Objective> HessianOperator<O> {
    pub fn block(&self) -> BlockSel {
        self.block
    }

    pub fn params(&self) -> &ParamSet {
        &self.params
    }
}

impl<O: Objective> CurvatureOperator for HessianOperator<O> {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self, v)?;
        Ok(autodiff::hvp(&self.objective, &self.params, self.block, v)?.into_inner())
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Explicit symmetric matrix, row-major.
#[derive(Clone, Debug)]
pub struct DenseOperator {
    dim: usize,
    matrix: Vec<f64>,
    label: String,
}

impl DenseOperator {
    pub fn new(dim: usize, matrix: Vec<f64>, label: impl Into<String>) -> Result<Self> {
        if matrix.len() != dim * dim {
            return Err(Error::Length {
                expected: dim * dim,
                got: matrix.len(),
            });
        }
        Ok(DenseOperator {
            dim,
            matrix,
            label: label.into(),
        })
    }

    pub fn matrix(&self) -> &[f64] {
        &self.matrix
    }

    pub fn trace(&self) -> f64 {
        (0..self.dim).map(|i| self.matrix[i * self.dim + i]).sum()
    }
}

impl CurvatureOperator for DenseOperator {
    fn dim(&self) -> usize {
        self.dim
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self, v)?;
        Ok(self
            .matrix
            .chunks_exact(self.dim)
            .map(|row| row.iter().zip(v).map(|(a, b)| a * b).sum())
            .collect())
    }

    fn label(&self) -> &str {
        &self.label
    }
}

/// Diagonal matrix.
#[derive(Clone, Debug)]
pub struct DiagonalOperator {
    diag: Vec<f64>,
    label: String,
}

impl DiagonalOperator {
    pub fn new(diag: Vec<f64>, label: impl Into<String>) -> Self {
        DiagonalOperator {
            diag,
            label: label.into(),
        }
    }

    /// `scale · I` of dimension `dim`.
    pub fn scaled_identity(dim: usize, scale: f64) -> Self {
        Self::new(vec![scale; dim], "identity")
    }

    pub fn diagonal(&self) -> &[f64] {
        &self.diag
    }
}

impl CurvatureOperator for DiagonalOperator {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn apply(&self, v: &[f64]) -> Result<Vec<f64>> {
        check_len(self, v)?;
        Ok(self.diag.iter().zip(v).map(|(d, x)| d * x).collect())
    }

    fn label(&self) -> &str {
        &self.label
    }
}

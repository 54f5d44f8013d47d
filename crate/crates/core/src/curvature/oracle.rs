//! Dense references for validating the matrix-free estimators.

use nalgebra::{DMatrix, SymmetricEigen};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;

use super::operator::DenseOperator;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Largest dimension the dense oracle accepts.
pub const MAX_ORACLE_DIM: usize = 2000;

/// All eigenvalues of a symmetric row-major `dim × dim` matrix, ascending.
pub fn dense_spectrum_oracle(dim: usize, matrix: &[f64]) -> Result<Vec<f64>> {
    if matrix.len() != dim * dim {
        return Err(Error::Length {
            expected: dim * dim,
            got: matrix.len(),
        });
    }
    if dim == 0 || dim > MAX_ORACLE_DIM {
        return Err(Error::InvalidArgument(format!(
            "oracle dimension must be in 1..={MAX_ORACLE_DIM}, got {dim}"
        )));
    }
    for i in 0..dim {
        for j in 0..i {
            if (matrix[i * dim + j] - matrix[j * dim + i]).abs() > 1e-12 {
                return Err(Error::InvalidArgument(format!(
                    "matrix is not symmetric at ({i}, {j})"
                )));
            }
        }
    }
    let m = DMatrix::from_row_slice(dim, dim, matrix);
    let mut eig = SymmetricEigen::new(m).eigenvalues.as_slice().to_vec();
    eig.sort_by(f64::total_cmp);
    Ok(eig)
}

/// `A = (B + Bᵀ)/2` with iid standard normal `B`, as an operator and as the
/// explicit row-major matrix.
pub fn random_symmetric_operator(dim: usize, seed: u64) -> (DenseOperator, Vec<f64>) {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "random-symmetric", 0));
    let b: Vec<f64> = (0..dim * dim).map(|_| rng.sample(StandardNormal)).collect();
    let mut a = vec![0.0; dim * dim];
    for i in 0..dim {
        for j in 0..dim {
            a[i * dim + j] = 0.5 * (b[i * dim + j] + b[j * dim + i]);
        }
    }
    let op = DenseOperator::new(dim, a.clone(), "random-symmetric").expect("square by construction");
    (op, a)
}

/// Exact spectrum smoothed with the same Gaussian kernel SLQ uses, on `grid`.
pub fn smoothed_exact_density(eigenvalues: &[f64], grid: &[f64], sigma: f64) -> Vec<f64> {
    let norm = 1.0 / (eigenvalues.len() as f64 * sigma * (2.0 * std::f64::consts::PI).sqrt());
    grid.iter()
        .map(|&t| {
            eigenvalues
                .iter()
                .map(|&l| {
                    let z = (t - l) / sigma;
                    (-0.5 * z * z).exp()
                })
                .sum::<f64>()
                * norm
        })
        .collect()
}

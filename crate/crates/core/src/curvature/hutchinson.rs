use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::operator::CurvatureOperator;
use crate::autodiff::dot;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::seed::derive_seed;

/// Default probe count.
pub const DEFAULT_PROBES: usize = 500;

/// Running summary of Hutchinson quadratic forms `vᵀ H v`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TraceEstimate {
    pub mean: f64,
    /// Sample standard deviation over `sqrt(n_samples)`; 0 for a single sample.
    pub stderr: f64,
    pub n_samples: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub samples: Option<Vec<f64>>,
}

impl TraceEstimate {
    /// Summarizes samples in the given order.
    pub fn from_samples(samples: &[f64]) -> Result<Self> {
        let n = samples.len();
        if n == 0 {
            return Err(Error::InvalidArgument("no trace samples".into()));
        }
        let mean = samples.iter().sum::<f64>() / n as f64;
        let stderr = if n > 1 {
            let ss: f64 = samples.iter().map(|s| (s - mean) * (s - mean)).sum();
            (ss / (n - 1) as f64).sqrt() / (n as f64).sqrt()
        } else {
            0.0
        };
        Ok(TraceEstimate {
            mean,
            stderr,
            n_samples: n,
            samples: None,
        })
    }
}

/// The `index`-th Rademacher probe for `seed`; independent of evaluation order.
pub fn rademacher_probe(dim: usize, seed: u64, index: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "rademacher", index as u64));
    (0..dim)
        .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
        .collect()
}

/// Hutchinson trace estimate with Rademacher probes.
pub fn hutchinson_trace(op: &impl CurvatureOperator, n_samples: usize, seed: u64) -> Result<TraceEstimate> {
    hutchinson_trace_with(op, n_samples, seed, Execution::default(), false)
}

/// [`hutchinson_trace`] with explicit scheduling. Probes are evaluated
/// independently; the reduction always runs in probe order.
pub fn hutchinson_trace_with(
    op: &impl CurvatureOperator,
    n_samples: usize,
    seed: u64,
    exec: Execution,
    keep_samples: bool,
) -> Result<TraceEstimate> {
    if n_samples == 0 {
        return Err(Error::InvalidArgument("n_samples must be at least 1".into()));
    }
    let dim = op.dim();
    let samples = exec::try_map_indexed(exec, n_samples, |i| {
        let v = rademacher_probe(dim, seed, i);
        let hv = op.apply(&v)?;
        let q = dot(&v, &hv);
        if !q.is_finite() {
            return Err(Error::NonFinite(format!(
                "{}: quadratic form of probe {i}",
                op.label()
            )));
        }
        Ok(q)
    })?;
    let mut est = TraceEstimate::from_samples(&samples)?;
    if keep_samples {
        est.samples = Some(samples);
    }
    Ok(est)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::DiagonalOperator;

    #[test]
    fn identity_is_exact() {
        let op = DiagonalOperator::scaled_identity(7, 1.0);
        let est = hutchinson_trace(&op, 25, 3).unwrap();
        assert_eq!(est.mean, 7.0);
        assert_eq!(est.stderr, 0.0);
        assert_eq!(est.n_samples, 25);
    }

    #[test]
    fn zero_operator_is_zero() {
        let op = DiagonalOperator::scaled_identity(5, 0.0);
        assert_eq!(hutchinson_trace(&op, 10, 0).unwrap().mean, 0.0);
    }

    #[test]
    fn diagonal_within_three_stderr() {
        let op = DiagonalOperator::new((1..=10).map(f64::from).collect(), "diag");
        let est = hutchinson_trace(&op, 500, 11).unwrap();
        // Rademacher probes are exact on diagonal matrices: v_i² = 1.
        assert!((est.mean - 55.0).abs() <= 3.0 * est.stderr + 1e-12);
    }

    #[test]
    fn sequential_and_parallel_agree_bitwise() {
        let op = crate::curvature::random_symmetric_operator(30, 2).0;
        let a = hutchinson_trace_with(&op, 40, 9, Execution::Sequential, true).unwrap();
        let b = hutchinson_trace_with(&op, 40, 9, Execution::Parallel, true).unwrap();
        assert_eq!(a, b);
        assert_eq!(a.samples.as_ref().unwrap().len(), 40);
    }

    #[test]
    fn single_sample_has_zero_stderr() {
        let est = TraceEstimate::from_samples(&[3.0]).unwrap();
        assert_eq!((est.mean, est.stderr), (3.0, 0.0));
        assert!(hutchinson_trace(&DiagonalOperator::scaled_identity(2, 1.0), 0, 0).is_err());
    }

    #[test]
    fn probes_are_rademacher() {
        let v = rademacher_probe(1000, 5, 0);
        assert!(v.iter().all(|&x| x == 1.0 || x == -1.0));
        let pos = v.iter().filter(|&&x| x > 0.0).count();
        assert!((400..600).contains(&pos));
        assert_ne!(v, rademacher_probe(1000, 5, 1));
    }
}

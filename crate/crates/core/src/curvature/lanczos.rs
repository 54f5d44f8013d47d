use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use super::operator::CurvatureOperator;
use super::tridiag::tridiagonal_eigen;
use crate::autodiff::dot;
use crate::error::{Error, Result};
use crate::seed::derive_seed;

/// Default Lanczos iteration count.
pub const DEFAULT_ITERATIONS: usize = 100;

/// Relative size of β below which the Krylov space is treated as exhausted.
pub const BREAKDOWN_TOL: f64 = 1e-12;

/// Distribution of the Lanczos start vector before normalization.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StartVector {
    #[default]
    Gaussian,
    Rademacher,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct LanczosOptions {
    pub start: StartVector,
    /// Keep the orthonormal Krylov basis in the result.
    pub keep_basis: bool,
}

/// Ritz values of one Lanczos run with their quadrature weights.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RitzSpectrum {
    /// Ascending.
    pub values: Vec<f64>,
    /// Nonnegative, summing to one.
    pub weights: Vec<f64>,
}

impl RitzSpectrum {
    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

#[derive(Clone, Debug)]
pub struct LanczosRun {
    pub spectrum: RitzSpectrum,
    pub alpha: Vec<f64>,
    pub beta: Vec<f64>,
    /// Whether the run stopped early on a vanishing β.
    pub breakdown: bool,
    pub basis: Option<Vec<Vec<f64>>>,
}

/// Unit-norm start vector for `seed`.
pub fn start_vector(dim: usize, seed: u64, kind: StartVector) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(derive_seed(seed, "lanczos-start", 0));
    let mut v: Vec<f64> = match kind {
        StartVector::Gaussian => (0..dim).map(|_| rng.sample(StandardNormal)).collect(),
        StartVector::Rademacher => (0..dim)
            .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
            .collect(),
    };
    let norm = dot(&v, &v).sqrt();
    v.iter_mut().for_each(|x| *x /= norm);
    v
}

/// One Lanczos run with a Gaussian start vector.
pub fn lanczos(op: &impl CurvatureOperator, iters: usize, seed: u64) -> Result<RitzSpectrum> {
    Ok(lanczos_with(op, iters, seed, &LanczosOptions::default())?.spectrum)
}

pub fn lanczos_with(
    op: &impl CurvatureOperator,
    iters: usize,
    seed: u64,
    opts: &LanczosOptions,
) -> Result<LanczosRun> {
    let dim = op.dim();
    if iters == 0 || iters > dim {
        return Err(Error::InvalidArgument(format!(
            "lanczos iterations must be in 1..={dim}, got {iters}"
        )));
    }
    let mut basis = vec![start_vector(dim, seed, opts.start)];
    let mut alpha = Vec::with_capacity(iters);
    let mut beta: Vec<f64> = Vec::with_capacity(iters);
    let mut scale = 0.0_f64;
    let mut breakdown = false;

    loop {
        let j = basis.len() - 1;
        let q = &basis[j];
        let mut w = op.apply(q)?;
        if w.len() != dim || w.iter().any(|x| !x.is_finite()) {
            return Err(Error::NonFinite(format!(
                "{}: operator output at lanczos step {j}",
                op.label()
            )));
        }
        let a = dot(q, &w);
        alpha.push(a);
        scale = scale.max(a.abs());
        if alpha.len() == iters {
            break;
        }
        for (wi, qi) in w.iter_mut().zip(q) {
            *wi -= a * qi;
        }
        if j > 0 {
            let b = beta[j - 1];
            for (wi, pi) in w.iter_mut().zip(&basis[j - 1]) {
                *wi -= b * pi;
            }
        }
        // Full reorthogonalization, two passes.
        for _ in 0..2 {
            for prev in &basis {
                let c = dot(prev, &w);
                for (wi, pi) in w.iter_mut().zip(prev) {
                    *wi -= c * pi;
                }
            }
        }
        let b = dot(&w, &w).sqrt();
        scale = scale.max(b);
        if b <= BREAKDOWN_TOL * scale {
            breakdown = true;
            break;
        }
        w.iter_mut().for_each(|x| *x /= b);
        beta.push(b);
        basis.push(w);
    }

    let (values, first) = tridiagonal_eigen(&alpha, &beta)?;
    let weights = first.iter().map(|z| z * z).collect();
    Ok(LanczosRun {
        spectrum: RitzSpectrum { values, weights },
        alpha,
        beta,
        breakdown,
        basis: opts.keep_basis.then_some(basis),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::{random_symmetric_operator, DiagonalOperator};

    #[test]
    fn identity_breaks_down_after_one_step() {
        let op = DiagonalOperator::scaled_identity(20, 1.0);
        let run = lanczos_with(&op, 10, 1, &LanczosOptions::default()).unwrap();
        assert!(run.breakdown);
        assert_eq!(run.spectrum.values.len(), 1);
        assert!((run.spectrum.values[0] - 1.0).abs() < 1e-15);
        assert!((run.spectrum.weights[0] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn diagonal_is_recovered() {
        let op = DiagonalOperator::new((1..=10).map(f64::from).collect(), "d");
        let s = lanczos(&op, 10, 4).unwrap();
        for (k, v) in s.values.iter().enumerate() {
            assert!((v - (k + 1) as f64).abs() < 1e-8);
        }
        assert!((s.weights.iter().sum::<f64>() - 1.0).abs() < 1e-10);
    }

    #[test]
    fn basis_is_orthonormal() {
        let (op, _) = random_symmetric_operator(60, 3);
        let opts = LanczosOptions {
            keep_basis: true,
            ..Default::default()
        };
        let run = lanczos_with(&op, 40, 8, &opts).unwrap();
        let basis = run.basis.unwrap();
        assert_eq!(basis.len(), 40);
        for i in 0..basis.len() {
            for j in 0..=i {
                let d = dot(&basis[i], &basis[j]);
                let expect = if i == j { 1.0 } else { 0.0 };
                assert!((d - expect).abs() < 1e-8, "{i},{j}: {d}");
            }
        }
    }

    #[test]
    fn iteration_bounds() {
        let op = DiagonalOperator::scaled_identity(3, 1.0);
        assert!(lanczos(&op, 0, 0).is_err());
        assert!(lanczos(&op, 4, 0).is_err());
    }

    #[test]
    fn start_vectors_are_unit() {
        for kind in [StartVector::Gaussian, StartVector::Rademacher] {
            let v = start_vector(50, 2, kind);
            assert!((dot(&v, &v) - 1.0).abs() < 1e-14);
        }
    }

    struct Nan;
    impl CurvatureOperator for Nan {
        fn dim(&self) -> usize {
            2
        }
        fn apply(&self, _: &[f64]) -> Result<Vec<f64>> {
            Ok(vec![f64::NAN; 2])
        }
        fn label(&self) -> &str {
            "nan"
        }
    }

    #[test]
    fn non_finite_output_is_an_error() {
        assert!(matches!(lanczos(&Nan, 2, 0), Err(Error::NonFinite(_))));
    }
}

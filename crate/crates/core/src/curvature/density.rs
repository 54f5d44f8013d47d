use serde::{Deserialize, Serialize};

use super::lanczos::{lanczos_with, LanczosOptions, RitzSpectrum, StartVector, DEFAULT_ITERATIONS};
use super::operator::CurvatureOperator;
use crate::error::{Error, Result};
use crate::exec::{self, Execution};
use crate::seed::derive_seed;

pub const DEFAULT_RUNS: usize = 10;
pub const DEFAULT_GRID_POINTS: usize = 1024;

#[derive(Clone, Debug, PartialEq)]
pub struct SlqOptions {
    pub iterations: usize,
    pub runs: usize,
    /// Kernel width; `None` picks `0.01 · max(1, Ritz range)`.
    pub sigma: Option<f64>,
    pub grid_points: usize,
    pub start: StartVector,
    pub exec: Execution,
}

impl Default for SlqOptions {
    fn default() -> Self {
        SlqOptions {
            iterations: DEFAULT_ITERATIONS,
            runs: DEFAULT_RUNS,
            sigma: None,
            grid_points: DEFAULT_GRID_POINTS,
            start: StartVector::Gaussian,
            exec: Execution::default(),
        }
    }
}

/// Gaussian-smoothed spectral density on a uniform grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpectralDensity {
    pub grid: Vec<f64>,
    pub density: Vec<f64>,
    pub sigma: f64,
    /// One Ritz spectrum per Lanczos run.
    pub runs: Vec<RitzSpectrum>,
}

impl SpectralDensity {
    /// Ritz pairs of all runs pooled, each weight divided by the run count.
    pub fn pooled_ritz(&self) -> Vec<(f64, f64)> {
        let r = self.runs.len() as f64;
        self.runs
            .iter()
            .flat_map(|s| s.values.iter().zip(&s.weights).map(move |(&v, &w)| (v, w / r)))
            .collect()
    }

    pub fn integral(&self) -> f64 {
        trapezoid(&self.grid, &self.density)
    }
}

/// Trapezoidal integral of samples `y` over the ascending abscissae `x`.
pub fn trapezoid(x: &[f64], y: &[f64]) -> f64 {
    x.windows(2)
        .zip(y.windows(2))
        .map(|(xs, ys)| 0.5 * (xs[1] - xs[0]) * (ys[0] + ys[1]))
        .sum()
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn uniform_grid(lo: f64, hi: f64, n: usize) -> Vec<f64> {
    let step = (hi - lo) / (n - 1) as f64;
    (0..n).map(|i| lo + step * i as f64).collect()
}

fn gaussian(t: f64, mu: f64, sigma: f64) -> f64 {
    let z = (t - mu) / sigma;
    (-0.5 * z * z).exp() / (sigma * (2.0 * std::f64::consts::PI).sqrt())
}

/// Stochastic Lanczos quadrature estimate of the eigenvalue density of `op`.
pub fn slq_density(op: &impl CurvatureOperator, opts: &SlqOptions, seed: u64) -> Result<SpectralDensity> {
    if opts.runs == 0 {
        return Err(Error::InvalidArgument("runs must be at least 1".into()));
    }
    if opts.grid_points < 2 {
        return Err(Error::InvalidArgument("grid_points must be at least 2".into()));
    }
    if let Some(s) = opts.sigma {
        if !(s > 0.0 && s.is_finite()) {
            return Err(Error::InvalidArgument(format!("sigma must be positive, got {s}")));
        }
    }
    let lopts = LanczosOptions {
        start: opts.start,
        keep_basis: false,
    };
    let runs = exec::try_map_indexed(opts.exec, opts.runs, |r| {
        lanczos_with(op, opts.iterations, derive_seed(seed, "lanczos", r as u64), &lopts)
            .map(|run| run.spectrum)
    })?;

    let (lo, hi) = runs
        .iter()
        .flat_map(|s| s.values.iter().copied())
        .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), v| (lo.min(v), hi.max(v)));
    let sigma = opts.sigma.unwrap_or(0.01 * (hi - lo).max(1.0));
    let grid = uniform_grid(lo - 3.0 * sigma, hi + 3.0 * sigma, opts.grid_points);

    let inv_runs = 1.0 / runs.len() as f64;
    let mut density: Vec<f64> = grid
        .iter()
        .map(|&t| {
            runs.iter()
                .map(|s| {
                    s.values
                        .iter()
                        .zip(&s.weights)
                        .map(|(&v, &w)| w * gaussian(t, v, sigma))
                        .sum::<f64>()
                })
                .sum::<f64>()
                * inv_runs
        })
        .collect();
    let total = trapezoid(&grid, &density);
    if !(total > 0.0 && total.is_finite()) {
        return Err(Error::Numerical(format!(
            "{}: density has non-positive mass {total}",
            op.label()
        )));
    }
    density.iter_mut().for_each(|d| *d /= total);
    Ok(SpectralDensity {
        grid,
        density,
        sigma,
        runs,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::curvature::DiagonalOperator;

    #[test]
    fn scaled_identity_is_one_bump_at_two() {
        let op = DiagonalOperator::scaled_identity(30, 2.0);
        let opts = SlqOptions {
            iterations: 30,
            ..Default::default()
        };
        let d = slq_density(&op, &opts, 1).unwrap();
        let (argmax, _) = d
            .density
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.total_cmp(b.1))
            .unwrap();
        let cell = d.grid[1] - d.grid[0];
        assert!((d.grid[argmax] - 2.0).abs() <= cell);
        assert!((d.integral() - 1.0).abs() < 1e-3);
        assert!(d.runs.iter().all(|r| r.len() == 1));
    }

    #[test]
    fn symmetric_spectrum_gives_symmetric_density() {
        let op = DiagonalOperator::new(vec![-1.0, 1.0], "pm");
        let opts = SlqOptions {
            iterations: 2,
            start: StartVector::Rademacher,
            ..Default::default()
        };
        let d = slq_density(&op, &opts, 5).unwrap();
        let n = d.grid.len();
        for i in 0..n {
            assert!((d.grid[i] + d.grid[n - 1 - i]).abs() < 1e-9);
            assert!((d.density[i] - d.density[n - 1 - i]).abs() < 1e-6);
        }
    }

    #[test]
    fn density_is_nonnegative_with_unit_mass() {
        let (op, _) = crate::curvature::random_symmetric_operator(80, 6);
        let opts = SlqOptions {
            iterations: 30,
            runs: 3,
            ..Default::default()
        };
        let d = slq_density(&op, &opts, 2).unwrap();
        assert!(d.density.iter().all(|&x| x >= 0.0));
        assert!((d.integral() - 1.0).abs() < 1e-3);
        let mass: f64 = d.pooled_ritz().iter().map(|p| p.1).sum();
        assert!((mass - 1.0).abs() < 1e-10);
    }

    #[test]
    fn sequential_and_parallel_agree() {
        let (op, _) = crate::curvature::random_symmetric_operator(40, 1);
        let mut opts = SlqOptions {
            iterations: 20,
            runs: 4,
            exec: Execution::Sequential,
            ..Default::default()
        };
        let a = slq_density(&op, &opts, 3).unwrap();
        opts.exec = Execution::Parallel;
        assert_eq!(a, slq_density(&op, &opts, 3).unwrap());
    }

    #[test]
    fn rejects_bad_options() {
        let op = DiagonalOperator::scaled_identity(3, 1.0);
        let bad = [
            SlqOptions { runs: 0, ..Default::default() },
            SlqOptions { grid_points: 1, ..Default::default() },
            SlqOptions { sigma: Some(0.0), iterations: 3, ..Default::default() },
        ];
        for o in bad {
            assert!(slq_density(&op, &o, 0).is_err());
        }
    }
}

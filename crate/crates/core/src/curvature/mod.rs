//! Matrix-free curvature estimates: Hutchinson traces and stochastic Lanczos
//! quadrature densities, plus dense references.

mod density;
mod hutchinson;
mod lanczos;
mod operator;
mod oracle;
mod tridiag;

pub use density::{
    slq_density, trapezoid, uniform_grid, SlqOptions, SpectralDensity, DEFAULT_GRID_POINTS, DEFAULT_RUNS,
};
pub use hutchinson::{hutchinson_trace, hutchinson_trace_with, rademacher_probe, TraceEstimate, DEFAULT_PROBES};
pub use lanczos::{
    lanczos, lanczos_with, start_vector, LanczosOptions, LanczosRun, RitzSpectrum, StartVector, BREAKDOWN_TOL,
    DEFAULT_ITERATIONS,
};
pub use operator::{hessian_operator, CurvatureOperator, DenseOperator, DiagonalOperator, HessianOperator};
pub use oracle::{dense_spectrum_oracle, random_symmetric_operator, smoothed_exact_density, MAX_ORACLE_DIM};
pub use tridiag::tridiagonal_eigen;

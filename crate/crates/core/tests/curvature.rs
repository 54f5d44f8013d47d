use gncurv::autodiff::{dot, BlockSel};
use gncurv::curvature::{
    dense_spectrum_oracle, hessian_operator, hutchinson_trace, lanczos, lanczos_with, random_symmetric_operator,
    slq_density, trapezoid, CurvatureOperator, DiagonalOperator, LanczosOptions, SlqOptions,
};
use gncurv::dataset::synth_generate;
use gncurv::graph::batch_graphs;
use gncurv::model::{GnConfig, GnModel, LossTarget};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

#[test]
fn off_diagonal_variance_of_random_operator() {
    let dim = 1000;
    let (_, a) = random_symmetric_operator(dim, 3);
    let mut sum = 0.0;
    let mut sq = 0.0;
    let mut count = 0.0;
    for i in 0..dim {
        for j in (i + 1)..dim {
            let x = a[i * dim + j];
            sum += x;
            sq += x * x;
            count += 1.0;
        }
    }
    let mean = sum / count;
    let var = sq / count - mean * mean;
    assert!((var - 0.5).abs() <= 0.05, "variance {var}");
}

#[test]
fn diagonal_trace_within_three_standard_errors() {
    let op = DiagonalOperator::new((1..=10).map(f64::from).collect(), "diag");
    let est = hutchinson_trace(&op, 500, 4).unwrap();
    assert!((est.mean - 55.0).abs() <= 3.0 * est.stderr);
}

#[test]
fn lanczos_recovers_small_diagonal() {
    let op = DiagonalOperator::new((1..=10).map(f64::from).collect(), "diag");
    let run = lanczos(&op, 10, 0).unwrap();
    for (k, v) in run.values.iter().enumerate() {
        assert!((v - (k + 1) as f64).abs() <= 1e-8);
    }
}

#[test]
fn smoothed_density_of_long_diagonal() {
    let eig: Vec<f64> = (1..=1000).map(f64::from).collect();
    let op = DiagonalOperator::new(eig.clone(), "diag");
    let d = slq_density(&op, &SlqOptions { runs: 40, ..Default::default() }, 5).unwrap();
    let norm = 1.0 / (eig.len() as f64 * d.sigma * (2.0 * std::f64::consts::PI).sqrt());
    let exact: Vec<f64> = d
        .grid
        .iter()
        .map(|t| eig.iter().map(|l| (-(t - l).powi(2) / (2.0 * d.sigma * d.sigma)).exp()).sum::<f64>() * norm)
        .collect();
    let diff: Vec<f64> = d.density.iter().zip(&exact).map(|(a, b)| (a - b).abs()).collect();
    let l1 = trapezoid(&d.grid, &diff);
    assert!(l1 <= 0.05, "L1 {l1}");
}

#[test]
fn retained_basis_is_orthonormal() {
    let (op, _) = random_symmetric_operator(80, 9);
    let opts = LanczosOptions { keep_basis: true, ..Default::default() };
    let run = lanczos_with(&op, 40, 2, &opts).unwrap();
    let basis = run.basis.unwrap();
    for (i, q) in basis.iter().enumerate() {
        assert!((dot(q, q) - 1.0).abs() <= 1e-8);
        for p in &basis[..i] {
            assert!(dot(p, q).abs() <= 1e-8);
        }
    }
}

fn gn_operator_parts() -> (GnModel, gncurv::graph::GraphBatch) {
    let model = GnModel::new(GnConfig {
        latent_dim: 4,
        steps: 2,
        edge_node_hidden: 5,
        global_hidden: 5,
        head_hidden: vec![3],
        ..Default::default()
    })
    .unwrap();
    let batch = batch_graphs(&synth_generate(3, 1)).unwrap();
    (model, batch)
}

#[test]
fn hessian_operator_is_linear_over_the_shared_block() {
    let (model, batch) = gn_operator_parts();
    let params = model.init_params(2).unwrap();
    let obj = model.objective(&batch, LossTarget::Task(0)).unwrap();
    let op = hessian_operator(obj, &params, BlockSel::Shared, "task0");
    assert_eq!(op.dim(), params.flatten(BlockSel::Shared).len());
    assert_eq!(op.label(), "task0");
    let mut rng = ChaCha8Rng::seed_from_u64(8);
    let v: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let w: Vec<f64> = (0..op.dim()).map(|_| rng.random_range(-1.0..1.0)).collect();
    let (a, b) = (1.7, -0.4);
    let mix: Vec<f64> = v.iter().zip(&w).map(|(x, y)| a * x + b * y).collect();
    let (hv, hw, hm) = (op.apply(&v).unwrap(), op.apply(&w).unwrap(), op.apply(&mix).unwrap());
    for ((x, y), z) in hv.iter().zip(&hw).zip(&hm) {
        let e = a * x + b * y;
        assert!((z - e).abs() <= 1e-10 * (1.0 + e.abs()));
    }
}

#[test]
fn task_traces_add_up_with_shared_probes() {
    let (model, batch) = gn_operator_parts();
    let params = model.init_params(6).unwrap();
    let trace = |target| {
        let obj = model.objective(&batch, target).unwrap();
        hutchinson_trace(&hessian_operator(obj, &params, BlockSel::Shared, "x"), 20, 77).unwrap().mean
    };
    let parts: f64 = (0..3).map(|t| trace(LossTarget::Task(t))).sum();
    let total = trace(LossTarget::Total);
    assert!((parts - total).abs() <= 1e-8 * total.abs());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn ritz_values_stay_inside_the_spectrum(dim in 2usize..60, seed: u64, frac in 0.1f64..1.0) {
        let (op, a) = random_symmetric_operator(dim, seed);
        let eig = dense_spectrum_oracle(dim, &a).unwrap();
        let iters = ((dim as f64 * frac).ceil() as usize).clamp(1, dim);
        let run = lanczos(&op, iters, seed.wrapping_add(1)).unwrap();
        let tol = 1e-6 * (eig[dim - 1] - eig[0]);
        prop_assert!(run.values.windows(2).all(|w| w[0] <= w[1]));
        for v in &run.values {
            prop_assert!(*v >= eig[0] - tol && *v <= eig[dim - 1] + tol);
        }
        prop_assert!(run.weights.iter().all(|w| *w >= 0.0));
        prop_assert!((run.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-10);
    }

    #[test]
    fn density_is_nonnegative_with_unit_mass(dim in 3usize..40, seed: u64, runs in 1usize..4) {
        let (op, _) = random_symmetric_operator(dim, seed);
        let opts = SlqOptions { iterations: dim.min(20), runs, grid_points: 256, ..Default::default() };
        let d = slq_density(&op, &opts, seed).unwrap();
        prop_assert!(d.density.iter().all(|x| *x >= 0.0));
        prop_assert!((trapezoid(&d.grid, &d.density) - 1.0).abs() <= 1e-3);
    }

    #[test]
    fn exact_recovery_of_distinct_spectrum(values in prop::collection::btree_set(-50i32..50, 1..25), seed: u64) {
        let eig: Vec<f64> = values.iter().map(|&v| f64::from(v)).collect();
        let op = DiagonalOperator::new(eig.clone(), "diag");
        let run = lanczos(&op, eig.len(), seed).unwrap();
        prop_assert_eq!(run.values.len(), eig.len());
        for (a, b) in run.values.iter().zip(&eig) {
            prop_assert!((a - b).abs() <= 1e-8, "{a} vs {b}");
        }
    }
}

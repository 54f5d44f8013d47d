//! Sequential vs data-parallel scheduling of the hot loops: Hutchinson probes,
//! SLQ runs and chunked minibatch gradients. Build without default features
//! to see the fallback path, where both variants run sequentially.

use criterion::{criterion_group, criterion_main, BenchmarkId, Criterion};
use gncurv::autodiff::BlockSel;
use gncurv::curvature::{hessian_operator, hutchinson_trace_with, random_symmetric_operator, slq_density, SlqOptions};
use gncurv::dataset::synth_generate;
use gncurv::exec::Execution;
use gncurv::graph::{batch_graphs, Multigraph};
use gncurv::model::{GnConfig, GnModel, LossTarget};
use gncurv::train::minibatch_grad;

const MODES: [(&str, Execution); 2] = [("sequential", Execution::Sequential), ("parallel", Execution::Parallel)];

fn small_model() -> GnModel {
    GnModel::new(GnConfig {
        latent_dim: 16,
        steps: 2,
        edge_node_hidden: 32,
        global_hidden: 32,
        head_hidden: vec![16],
        ..Default::default()
    })
    .unwrap()
}

fn hutchinson(c: &mut Criterion) {
    let mut group = c.benchmark_group("hutchinson");
    group.sample_size(10);
    let (dense, _) = random_symmetric_operator(500, 1);
    let model = small_model();
    let params = model.init_params(0).unwrap();
    let graphs = synth_generate(8, 2);
    let batch = batch_graphs(&graphs).unwrap();
    let hessian = hessian_operator(model.objective(&batch, LossTarget::Total).unwrap(), &params, BlockSel::Shared, "total");
    for (name, exec) in MODES {
        group.bench_with_input(BenchmarkId::new("dense500_x64", name), &exec, |b, &exec| {
            b.iter(|| hutchinson_trace_with(&dense, 64, 3, exec, false).unwrap())
        });
        group.bench_with_input(BenchmarkId::new("gn_hessian_x8", name), &exec, |b, &exec| {
            b.iter(|| hutchinson_trace_with(&hessian, 8, 3, exec, false).unwrap())
        });
    }
    group.finish();
}

fn slq(c: &mut Criterion) {
    let mut group = c.benchmark_group("slq");
    group.sample_size(10);
    let (op, _) = random_symmetric_operator(500, 4);
    for (name, exec) in MODES {
        let opts = SlqOptions { iterations: 60, runs: 8, exec, ..Default::default() };
        group.bench_function(BenchmarkId::new("dense500_p60_r8", name), |b| b.iter(|| slq_density(&op, &opts, 5).unwrap()));
    }
    group.finish();
}

fn gradient(c: &mut Criterion) {
    let mut group = c.benchmark_group("minibatch_grad");
    group.sample_size(10);
    let model = small_model();
    let params = model.init_params(0).unwrap();
    let graphs = synth_generate(32, 6);
    let refs: Vec<&Multigraph> = graphs.iter().collect();
    for (name, exec) in MODES {
        group.bench_function(BenchmarkId::new("batch32_chunk8", name), |b| {
            b.iter(|| minibatch_grad(&model, &params, &refs, 8, exec).unwrap())
        });
    }
    group.finish();
}

criterion_group!(benches, hutchinson, slq, gradient);
criterion_main!(benches);

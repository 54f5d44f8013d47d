use gncurv::dataset::synth_generate;
use gncurv::graph::{batch_graphs, symmetrize_edges, Multigraph};
use gncurv::model::{GnConfig, GnModel};
use proptest::prelude::*;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

fn model() -> GnModel {
    GnModel::new(GnConfig {
        latent_dim: 6,
        steps: 3,
        edge_node_hidden: 8,
        global_hidden: 7,
        head_hidden: vec![5],
        ..Default::default()
    })
    .unwrap()
}

fn one(seed: u64) -> Multigraph {
    synth_generate(1, seed).pop().unwrap()
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(48))]

    #[test]
    fn relabeling_nodes_leaves_predictions_unchanged(graph_seed: u64, perm_seed: u64, param_seed in 0u64..64) {
        let m = model();
        let params = m.init_params(param_seed).unwrap();
        let g = one(graph_seed);
        let mut perm: Vec<usize> = (0..g.node_count()).collect();
        perm.shuffle(&mut ChaCha8Rng::seed_from_u64(perm_seed));
        let moved = g.permute_nodes(&perm).unwrap();
        prop_assert!(moved.validate().is_ok() && moved.is_symmetric());
        let (a, b) = (m.forward(&g, &params).unwrap(), m.forward(&moved, &params).unwrap());
        for (x, y) in a.iter().zip(&b) {
            prop_assert!((x - y).abs() <= 1e-10, "{x} vs {y}");
        }
    }

    #[test]
    fn batching_matches_single_graph_forward(seed: u64, n in 1usize..7) {
        let m = model();
        let params = m.init_params(seed % 97).unwrap();
        let graphs = synth_generate(n, seed);
        let preds = m.predict_batch(&batch_graphs(&graphs).unwrap(), &params).unwrap();
        for (row, g) in preds.chunks_exact(3).zip(&graphs) {
            for (x, y) in row.iter().zip(m.forward(g, &params).unwrap()) {
                prop_assert!((x - y).abs() <= 1e-12);
            }
        }
    }

    #[test]
    fn batch_unbatch_roundtrip(seed: u64, n in 1usize..10) {
        let graphs = synth_generate(n, seed);
        let batch = batch_graphs(&graphs).unwrap();
        prop_assert_eq!(batch.total_nodes(), graphs.iter().map(Multigraph::node_count).sum::<usize>());
        prop_assert_eq!(batch.unbatch(), graphs);
    }

    #[test]
    fn symmetrization_is_idempotent(seed: u64) {
        let g = one(seed);
        let mut half = g.clone();
        half.edges.retain(|e| e.src <= e.dst);
        let sym = symmetrize_edges(&half).unwrap();
        prop_assert!(sym.is_symmetric());
        prop_assert_eq!(symmetrize_edges(&sym).unwrap(), sym.clone());
        prop_assert_eq!(sym.edge_count(), g.edge_count());
    }
}

#[test]
fn zero_heads_predict_zero_everywhere() {
    let m = model();
    let mut params = m.init_params(3).unwrap();
    let names: Vec<String> = params.names().iter().filter(|n| n.starts_with("head")).map(|n| n.to_string()).collect();
    for n in names {
        params.get_mut(&n).unwrap().data_mut().fill(0.0);
    }
    for g in synth_generate(5, 12) {
        assert_eq!(m.forward(&g, &params).unwrap(), vec![0.0; 3]);
    }
}

mod common;

use gsat_core::graph::extract_r_hop;
use gsat_core::kernels::{
    gknn_awk_layer, jsd_loss, wl_kernel, wl_kernel_features, wl_refine, WlDictionary,
};
use gsat_core::rng::stream;
use gsat_core::walks::{awk_feature_map, awk_inner};
use ndarray::Array2;
use rand::Rng;

#[test]
fn wl_kernel_is_symmetric() {
    let mut rng = stream(41, &[]);
    let mut dict = WlDictionary::new();
    for _ in 0..100 {
        let a = {
            let n = rng.random_range(1..10);
            common::random_graph(&mut rng, n, 0.3, 3)
        };
        let b = {
            let n = rng.random_range(1..10);
            common::random_graph(&mut rng, n, 0.3, 3)
        };
        assert_eq!(
            wl_kernel(&mut dict, &a, &b, 3),
            wl_kernel(&mut dict, &b, &a, 3)
        );
    }
}

#[test]
fn wl_gram_matrix_is_psd() {
    let mut rng = stream(42, &[]);
    let mut dict = WlDictionary::new();
    let feats: Vec<_> = (0..15)
        .map(|_| {
            let g = {
                let n = rng.random_range(3..12);
                common::random_graph(&mut rng, n, 0.3, 3)
            };
            wl_refine(&mut dict, &g, 3)
        })
        .collect();
    let k: Vec<Vec<f64>> = feats
        .iter()
        .map(|a| feats.iter().map(|b| wl_kernel_features(a, b)).collect())
        .collect();
    assert!(common::min_eigenvalue(&k) >= -1e-8);
}

#[test]
fn jsd_stays_within_bounds() {
    let mut rng = stream(43, &[]);
    for _ in 0..1000 {
        let (n, m) = (rng.random_range(1..12), rng.random_range(1..6));
        let sparse = rng.random_bool(0.3);
        let z = Array2::from_shape_simple_fn((n, m), || {
            if sparse && rng.random_bool(0.5) {
                0.0
            } else {
                rng.random_range(0.0..5.0)
            }
        });
        let loss = jsd_loss(z.view()).unwrap();
        assert!(
            loss <= 1e-12 && loss >= -(m as f64).ln() - 1e-12,
            "{loss} for m = {m}"
        );
    }
}

#[test]
fn awk_layer_equals_feature_map_inner_products() {
    let mut rng = stream(44, &[]);
    for _ in 0..10 {
        let g = common::random_connected_ish(&mut rng, 10, 0.15);
        let sub = extract_r_hop(&g, rng.random_range(0..10), 1).graph;
        let masks: Vec<_> = (0..3)
            .map(|_| {
                let n = rng.random_range(2..6);
                common::random_connected_ish(&mut rng, n, 0.3)
            })
            .collect();
        let layer = gknn_awk_layer(&sub, &masks, 3).unwrap();
        let phi = awk_feature_map(&sub, 3).unwrap();
        for (m, out) in masks.iter().zip(layer) {
            assert!((out - awk_inner(&phi, &awk_feature_map(m, 3).unwrap())).abs() <= 1e-10);
        }
    }
}

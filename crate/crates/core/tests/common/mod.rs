#![allow(dead_code)]

use std::path::PathBuf;

use gsat_core::Graph;
use rand::Rng;

pub fn data_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data")
}

/// Erdos-Renyi graph with node labels drawn from `0..labels`.
pub fn random_graph(rng: &mut impl Rng, n: usize, p: f64, labels: u32) -> Graph {
    let mut edges = Vec::new();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    let node_labels = (0..n).map(|_| rng.random_range(0..labels)).collect();
    Graph::new(n, edges, node_labels).unwrap()
}

/// Random graph in which every node has at least one neighbour.
pub fn random_connected_ish(rng: &mut impl Rng, n: usize, p: f64) -> Graph {
    let mut edges: Vec<(usize, usize)> = (1..n).map(|v| (rng.random_range(0..v), v)).collect();
    for u in 0..n {
        for v in u + 1..n {
            if rng.random_bool(p) {
                edges.push((u, v));
            }
        }
    }
    Graph::unlabeled(n, edges).unwrap()
}

pub fn cycle(n: usize) -> Graph {
    Graph::unlabeled(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
}

pub fn min_eigenvalue(k: &[Vec<f64>]) -> f64 {
    let n = k.len();
    let m = nalgebra::DMatrix::from_fn(n, n, |i, j| k[i][j]);
    m.symmetric_eigen()
        .eigenvalues
        .iter()
        .copied()
        .fold(f64::INFINITY, f64::min)
}

/// Random permutation of `0..n`.
pub fn permutation(rng: &mut impl Rng, n: usize) -> Vec<usize> {
    use rand::seq::SliceRandom;
    let mut p: Vec<usize> = (0..n).collect();
    p.shuffle(rng);
    p
}

mod common;

use std::collections::{BTreeSet, VecDeque};

use gsat_core::graph::{extract_r_hop, load_tu_dataset, make_splits, sample_walk, SplitRatios};
use gsat_core::rng::stream;
use gsat_core::Graph;
use proptest::prelude::*;

#[test]
fn mutag_loads_with_valid_edges() {
    let graphs = load_tu_dataset(common::data_dir().join("MUTAG"), "MUTAG").unwrap();
    assert_eq!(graphs.len(), 188);
    for g in &graphs {
        for &(u, v) in g.edges() {
            assert!(u != v && u < g.node_count() && v < g.node_count());
        }
    }
    let s = make_splits(&graphs, SplitRatios::default(), 0, true).unwrap();
    assert_eq!(s.train.len() + s.valid.len() + s.test.len(), 188);
    let t = make_splits(&graphs, SplitRatios::default(), 1, true).unwrap();
    assert_ne!(s.train, t.train);
}

#[test]
fn ten_balanced_graphs_split_8_1_1() {
    let graphs: Vec<Graph> = (0..10)
        .map(|i| {
            Graph::unlabeled(2, [(0, 1)])
                .unwrap()
                .with_target(gsat_core::Target::Class(i % 2))
        })
        .collect();
    let s = make_splits(&graphs, SplitRatios::default(), 4, true).unwrap();
    assert_eq!((s.train.len(), s.valid.len(), s.test.len()), (8, 1, 1));
    assert_eq!(s.train.iter().filter(|&&i| i % 2 == 0).count(), 4);
}

#[test]
fn walk_transitions_are_uniform() {
    let g = Graph::unlabeled(5, [(0, 1), (0, 2), (0, 3), (1, 2), (3, 4), (2, 4)]).unwrap();
    let mut rng = stream(5, &[]);
    for v in 0..5 {
        let mut counts = vec![0usize; 5];
        let walks = 100_000;
        for _ in 0..walks {
            counts[sample_walk(&g, v, 1, &mut rng).unwrap().nodes()[1]] += 1;
        }
        for &u in g.neighbors(v) {
            let freq = counts[u] as f64 / walks as f64;
            assert!(
                (freq - 1.0 / g.degree(v) as f64).abs() < 0.02,
                "node {v} -> {u}: {freq}"
            );
        }
    }
}

fn bfs_levels(g: &Graph, v: usize, r: usize) -> BTreeSet<usize> {
    let mut dist = vec![usize::MAX; g.node_count()];
    dist[v] = 0;
    let mut q = VecDeque::from([v]);
    while let Some(u) = q.pop_front() {
        for &w in g.neighbors(u) {
            if dist[w] == usize::MAX {
                dist[w] = dist[u] + 1;
                q.push_back(w);
            }
        }
    }
    (0..g.node_count()).filter(|&u| dist[u] <= r).collect()
}

#[test]
fn r_hop_matches_brute_force_bfs() {
    let mut rng = stream(8, &[]);
    for _ in 0..20 {
        let n = 2 + rand::Rng::random_range(&mut rng, 0..11);
        let g = common::random_graph(&mut rng, n, 0.25, 3);
        for v in 0..n {
            for r in 0..=3 {
                let sub = extract_r_hop(&g, v, r);
                let got: BTreeSet<usize> = sub.parent_nodes.iter().copied().collect();
                assert_eq!(got, bfs_levels(&g, v, r));
                assert_eq!(sub.parent_nodes[0], v);
                for &(a, b) in sub.graph.edges() {
                    assert!(g.has_edge(sub.parent_nodes[a], sub.parent_nodes[b]));
                }
                assert_eq!(
                    sub.graph.edge_count(),
                    g.edges()
                        .iter()
                        .filter(|(a, b)| got.contains(a) && got.contains(b))
                        .count()
                );
            }
        }
    }
}

proptest! {
    #[test]
    fn splits_are_disjoint_and_exhaustive(seed in any::<u64>(), n in 10usize..80, stratified in any::<bool>()) {
        let graphs: Vec<Graph> = (0..n)
            .map(|i| Graph::unlabeled(2, [(0, 1)]).unwrap().with_target(gsat_core::Target::Class(i % 3)))
            .collect();
        let s = make_splits(&graphs, SplitRatios::default(), seed, stratified).unwrap();
        let mut all: Vec<usize> = s.train.iter().chain(&s.valid).chain(&s.test).copied().collect();
        all.sort_unstable();
        prop_assert_eq!(all, (0..n).collect::<Vec<_>>());
    }
}

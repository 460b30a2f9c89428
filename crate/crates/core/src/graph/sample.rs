use std::collections::VecDeque;

use rand::Rng;

use super::{Graph, Subgraph, Walk};
use crate::error::{Error, Result};

/// Uniform random walk of `steps` transitions starting at `start`.
///
/// An isolated start node yields [`Error::DegenerateWalk`]; callers substitute
/// the single-node walk.
pub fn sample_walk<R: Rng + ?Sized>(
    g: &Graph,
    start: usize,
    steps: usize,
    rng: &mut R,
) -> Result<Walk> {
    assert!(start < g.node_count(), "start node {start} out of range");
    if g.degree(start) == 0 {
        return Err(Error::DegenerateWalk { node: start });
    }
    let mut nodes = Vec::with_capacity(steps + 1);
    let mut cur = start;
    nodes.push(cur);
    for _ in 0..steps {
        let nbrs = g.neighbors(cur);
        cur = nbrs[rng.random_range(0..nbrs.len())];
        nodes.push(cur);
    }
    Ok(Walk::from_nodes(nodes))
}

/// Induced subgraph on every node within BFS distance `radius` of `v`.
pub fn extract_r_hop(g: &Graph, v: usize, radius: usize) -> Subgraph {
    assert!(v < g.node_count(), "node {v} out of range");
    let mut local = vec![usize::MAX; g.node_count()];
    let mut order = vec![v];
    local[v] = 0;
    let mut queue = VecDeque::from([(v, 0usize)]);
    while let Some((u, d)) = queue.pop_front() {
        if d == radius {
            continue;
        }
        for &w in g.neighbors(u) {
            if local[w] == usize::MAX {
                local[w] = order.len();
                order.push(w);
                queue.push_back((w, d + 1));
            }
        }
    }
    let edges = g.edges().iter().filter_map(|&(a, b)| {
        (local[a] != usize::MAX && local[b] != usize::MAX).then_some((local[a], local[b]))
    });
    let labels = order.iter().map(|&p| g.node_labels()[p]).collect();
    let graph = Graph::new(order.len(), edges.collect::<Vec<_>>(), labels)
        .expect("induced subgraph of a valid graph is valid");
    Subgraph {
        center: v,
        radius,
        graph,
        parent_nodes: order,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;

    fn cycle(n: usize) -> Graph {
        Graph::unlabeled(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap()
    }

    #[test]
    fn path_forces_the_walk() {
        let g = Graph::unlabeled(2, [(0, 1)]).unwrap();
        let w = sample_walk(&g, 0, 3, &mut stream(0, &[])).unwrap();
        assert_eq!(w.nodes(), &[0, 1, 0, 1]);
    }

    #[test]
    fn isolated_start_is_degenerate() {
        let g = Graph::unlabeled(2, []).unwrap();
        assert!(matches!(
            sample_walk(&g, 1, 2, &mut stream(0, &[])),
            Err(Error::DegenerateWalk { node: 1 })
        ));
    }

    #[test]
    fn fixed_seed_repeats() {
        let g = cycle(7);
        let a = sample_walk(&g, 3, 20, &mut stream(42, &[])).unwrap();
        let b = sample_walk(&g, 3, 20, &mut stream(42, &[])).unwrap();
        assert_eq!(a, b);
        for pair in a.nodes().windows(2) {
            assert!(g.has_edge(pair[0], pair[1]));
        }
    }

    #[test]
    fn triangle_first_step_is_fair() {
        let g = cycle(3);
        let trials = 10_000;
        let to_one = (0..trials)
            .filter(|&s| sample_walk(&g, 0, 1, &mut stream(s, &[])).unwrap().nodes()[1] == 1)
            .count();
        let freq = to_one as f64 / trials as f64;
        assert!((freq - 0.5).abs() < 0.05, "frequency {freq}");
    }

    #[test]
    fn radius_zero_is_singleton() {
        let g = cycle(5);
        let s = extract_r_hop(&g, 2, 0);
        assert_eq!(s.graph.node_count(), 1);
        assert_eq!(s.graph.edge_count(), 0);
        assert_eq!(s.parent_nodes, vec![2]);
    }

    #[test]
    fn six_cycle_radius_one() {
        let s = extract_r_hop(&cycle(6), 0, 1);
        let mut nodes = s.parent_nodes.clone();
        nodes.sort_unstable();
        assert_eq!(nodes, vec![0, 1, 5]);
        assert_eq!(s.graph.edge_count(), 2);
    }

    #[test]
    fn large_radius_returns_component() {
        let g = Graph::unlabeled(6, [(0, 1), (1, 2), (3, 4)]).unwrap();
        let s = extract_r_hop(&g, 2, 10);
        assert_eq!(s.graph.node_count(), 3);
        assert_eq!(s.graph.edge_count(), 2);
    }
}

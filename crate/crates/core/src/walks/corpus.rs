use rayon::prelude::*;

use super::pattern::{anonymize, AnonymousWalkPattern, PatternVocabulary};
use crate::error::{Error, Result};
use crate::graph::{sample_walk, Graph};
use crate::rng;

/// Pattern ids of the walks sampled from every node of every graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WalkCorpus {
    /// `sequences[g][v]` holds the `r` pattern ids of node `v` in graph `g`,
    /// or nothing if the node is isolated.
    pub sequences: Vec<Vec<Vec<u32>>>,
    pub steps: usize,
    pub walks_per_node: usize,
    pub seed: u64,
}

impl WalkCorpus {
    pub fn graph_count(&self) -> usize {
        self.sequences.len()
    }

    pub fn node_count(&self) -> usize {
        self.sequences.iter().map(Vec::len).sum()
    }
}

/// Samples `r` walks of `l` steps from every node.
///
/// Each node draws from its own stream derived from `(seed, graph, node)`, so
/// the result does not depend on how the work is scheduled. Pattern ids are
/// assigned afterwards in graph, node, walk order.
pub fn build_corpus(
    graphs: &[Graph],
    l: usize,
    r: usize,
    seed: u64,
) -> Result<(PatternVocabulary, WalkCorpus)> {
    if l == 0 || r == 0 {
        return Err(Error::Config(format!(
            "walk length and walks per node must be positive (got l = {l}, r = {r})"
        )));
    }
    let sampled: Vec<Vec<Vec<AnonymousWalkPattern>>> = graphs
        .par_iter()
        .enumerate()
        .map(|(gi, g)| {
            (0..g.node_count())
                .map(|v| {
                    if g.degree(v) == 0 {
                        return Vec::new();
                    }
                    let mut rng = rng::stream(seed, &[gi as u64, v as u64]);
                    (0..r)
                        .map(|_| {
                            let walk =
                                sample_walk(g, v, l, &mut rng).expect("start node has a neighbour");
                            anonymize(&walk)
                        })
                        .collect()
                })
                .collect()
        })
        .collect();

    let mut vocab = PatternVocabulary::default();
    let mut sequences = Vec::with_capacity(sampled.len());
    for graph in sampled {
        let mut nodes = Vec::with_capacity(graph.len());
        for walks in graph {
            nodes.push(
                walks
                    .into_iter()
                    .map(|p| vocab.insert(p))
                    .collect::<Result<Vec<u32>>>()?,
            );
        }
        sequences.push(nodes);
    }
    Ok((
        vocab,
        WalkCorpus {
            sequences,
            steps: l,
            walks_per_node: r,
            seed,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn triangle() -> Graph {
        Graph::unlabeled(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap()
    }

    #[test]
    fn triangle_two_step_patterns() {
        let mut seen = [false; 2];
        for seed in 0..10 {
            let (vocab, corpus) = build_corpus(&[triangle()], 2, 10, seed).unwrap();
            for seq in &corpus.sequences[0] {
                assert_eq!(seq.len(), 10);
                for &id in seq {
                    match vocab.pattern(id).code() {
                        [0, 1, 0] => seen[0] = true,
                        [0, 1, 2] => seen[1] = true,
                        other => panic!("impossible pattern {other:?}"),
                    }
                }
            }
        }
        assert!(seen[0] && seen[1]);
    }

    #[test]
    fn one_walk_per_node_and_isolated_nodes_empty() {
        let g = Graph::unlabeled(3, vec![(0, 1)]).unwrap();
        let (_, corpus) = build_corpus(&[g], 3, 1, 0).unwrap();
        assert_eq!(corpus.sequences[0][0].len(), 1);
        assert_eq!(corpus.sequences[0][1].len(), 1);
        assert!(corpus.sequences[0][2].is_empty());
    }

    #[test]
    fn deterministic_under_seed() {
        let graphs = vec![
            triangle(),
            Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap(),
        ];
        let a = build_corpus(&graphs, 4, 5, 11).unwrap();
        let b = build_corpus(&graphs, 4, 5, 11).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn zero_length_rejected() {
        assert!(build_corpus(&[triangle()], 0, 3, 0).is_err());
        assert!(build_corpus(&[triangle()], 3, 0, 0).is_err());
    }
}

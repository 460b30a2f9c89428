use std::collections::BTreeMap;

use super::pattern::{anonymize_nodes, AnonymousWalkPattern};
use crate::error::{Error, Result};
use crate::graph::Graph;

/// Largest number of walks the exact enumeration will visit.
pub const AWK_ENUMERATION_LIMIT: u128 = 1_000_000;

/// Exact distribution over anonymous patterns, keyed by pattern.
pub type AwkFeature = BTreeMap<AnonymousWalkPattern, f64>;

/// Number of `l`-step walks from each node, by dynamic programming.
fn walk_counts(g: &Graph, l: usize) -> Vec<u128> {
    let mut counts = vec![1u128; g.node_count()];
    for _ in 0..l {
        counts = (0..g.node_count())
            .map(|v| {
                g.neighbors(v)
                    .iter()
                    .fold(0u128, |acc, &u| acc.saturating_add(counts[u]))
            })
            .collect();
    }
    counts
}

fn guard(g: &Graph, starts: &[usize], l: usize) -> Result<()> {
    let counts = walk_counts(g, l);
    let total = starts
        .iter()
        .fold(0u128, |acc, &v| acc.saturating_add(counts[v]));
    if total > AWK_ENUMERATION_LIMIT {
        return Err(Error::EnumerationTooLarge {
            walks: total,
            limit: AWK_ENUMERATION_LIMIT,
        });
    }
    Ok(())
}

/// Visits every `l`-step walk from `start` with its probability under uniform
/// neighbour choice, scaled by `weight`.
pub(crate) fn for_each_walk(
    g: &Graph,
    start: usize,
    l: usize,
    weight: f64,
    visit: &mut impl FnMut(&[usize], f64),
) {
    fn rec(
        g: &Graph,
        path: &mut Vec<usize>,
        left: usize,
        p: f64,
        visit: &mut impl FnMut(&[usize], f64),
    ) {
        if left == 0 {
            visit(path, p);
            return;
        }
        let v = *path.last().unwrap();
        let nbrs = g.neighbors(v);
        let step = p / nbrs.len() as f64;
        for &u in nbrs {
            path.push(u);
            rec(g, path, left - 1, step, visit);
            path.pop();
        }
    }
    if l > 0 && g.degree(start) == 0 {
        return;
    }
    let mut path = Vec::with_capacity(l + 1);
    path.push(start);
    rec(g, &mut path, l, weight, visit);
}

fn accumulate(g: &Graph, starts: &[usize], l: usize) -> Result<AwkFeature> {
    guard(g, starts, l)?;
    let mut feature = AwkFeature::new();
    let weight = 1.0 / starts.len() as f64;
    for &s in starts {
        for_each_walk(g, s, l, weight, &mut |path, p| {
            *feature.entry(anonymize_nodes(path)).or_insert(0.0) += p;
        });
    }
    Ok(feature)
}

/// Probability of each anonymous pattern for an `l`-step random walk whose
/// start is drawn uniformly from the nodes that have a neighbour.
pub fn awk_feature_map(g: &Graph, l: usize) -> Result<AwkFeature> {
    let starts: Vec<usize> = (0..g.node_count())
        .filter(|&v| l == 0 || g.degree(v) > 0)
        .collect();
    if starts.is_empty() {
        return Err(Error::DegenerateWalk { node: 0 });
    }
    accumulate(g, &starts, l)
}

/// Pattern distribution of `l`-step walks started at `v`.
pub fn awk_rooted_feature(g: &Graph, v: usize, l: usize) -> Result<AwkFeature> {
    if l > 0 && g.degree(v) == 0 {
        return Err(Error::DegenerateWalk { node: v });
    }
    accumulate(g, &[v], l)
}

/// Lays a feature out along `patterns`; mass on patterns outside the list is dropped.
pub fn awk_dense(feature: &AwkFeature, patterns: &[AnonymousWalkPattern]) -> Vec<f64> {
    patterns
        .iter()
        .map(|p| feature.get(p).copied().unwrap_or(0.0))
        .collect()
}

pub fn awk_inner(a: &AwkFeature, b: &AwkFeature) -> f64 {
    a.iter().filter_map(|(p, x)| b.get(p).map(|y| x * y)).sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn pat(code: &[u32]) -> AnonymousWalkPattern {
        AnonymousWalkPattern::from_code(code.to_vec()).unwrap()
    }

    #[test]
    fn two_node_path_is_forced() {
        let g = Graph::unlabeled(2, vec![(0, 1)]).unwrap();
        let f = awk_feature_map(&g, 2).unwrap();
        assert_eq!(f.len(), 1);
        assert!((f[&pat(&[0, 1, 0])] - 1.0).abs() < 1e-15);
    }

    #[test]
    fn triangle_three_steps() {
        // From any start: 2 choices for step 1. Step 2 returns with prob 1/2 or
        // goes to the third node; from the third node, returning to the start
        // has prob 1/2. So Pr([0,1,2,0]) = 1/2 * 1/2 = 1/4.
        let g = Graph::unlabeled(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let f = awk_feature_map(&g, 3).unwrap();
        assert!((f[&pat(&[0, 1, 2, 0])] - 0.25).abs() < 1e-15);
        assert!((f.values().sum::<f64>() - 1.0).abs() < 1e-12);
    }

    #[test]
    fn cycle_rooted_has_no_triangle_return() {
        let c6 = Graph::unlabeled(6, (0..6).map(|i| (i, (i + 1) % 6))).unwrap();
        let f = awk_rooted_feature(&c6, 0, 3).unwrap();
        assert!(!f.contains_key(&pat(&[0, 1, 2, 0])));
    }

    #[test]
    fn isomorphic_graphs_match() {
        let a = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3), (1, 3)]).unwrap();
        let b = a.permuted(&[2, 0, 3, 1]).unwrap();
        assert_eq!(
            awk_feature_map(&a, 3).unwrap().len(),
            awk_feature_map(&b, 3).unwrap().len()
        );
        for (x, y) in awk_feature_map(&a, 3)
            .unwrap()
            .values()
            .zip(awk_feature_map(&b, 3).unwrap().values())
        {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn guard_trips_on_large_enumeration() {
        let k = 12;
        let edges: Vec<_> = (0..k)
            .flat_map(|i| (i + 1..k).map(move |j| (i, j)))
            .collect();
        let g = Graph::unlabeled(k, edges).unwrap();
        assert!(matches!(
            awk_feature_map(&g, 8),
            Err(Error::EnumerationTooLarge { .. })
        ));
    }
}

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::graph::Walk;
use crate::walks::{anonymize, for_each_walk, AnonymousWalkPattern, AWK_ENUMERATION_LIMIT};

/// Every `l`-step walk of `g` with its probability under a uniform start over
/// non-isolated nodes and uniform neighbour choice.
fn weighted_walks(g: &Graph, l: usize) -> Result<Vec<(AnonymousWalkPattern, f64)>> {
    let starts: Vec<usize> = (0..g.node_count()).filter(|&v| g.degree(v) > 0).collect();
    if starts.is_empty() {
        return Err(Error::DegenerateWalk { node: 0 });
    }
    let mut out = Vec::new();
    let w = 1.0 / starts.len() as f64;
    for &s in &starts {
        for_each_walk(g, s, l, w, &mut |path, p| {
            out.push((anonymize(&Walk::from_nodes(path.to_vec())), p));
        });
        if out.len() as u128 > AWK_ENUMERATION_LIMIT {
            return Err(Error::EnumerationTooLarge {
                walks: out.len() as u128,
                limit: AWK_ENUMERATION_LIMIT,
            });
        }
    }
    Ok(out)
}

/// Kernel-convolution layer whose kernel is the anonymous walk kernel: the
/// response to each mask is the probability that independent walks on the
/// input and on the mask share their anonymous pattern, summed over walk
/// pairs directly rather than through pattern histograms.
pub fn gknn_awk_layer(g: &Graph, masks: &[Graph], l: usize) -> Result<Vec<f64>> {
    let walks = weighted_walks(g, l)?;
    masks
        .iter()
        .map(|m| {
            let other = weighted_walks(m, l)?;
            let mut k = 0.0;
            for (a, p) in &walks {
                for (b, q) in &other {
                    if a == b {
                        k += p * q;
                    }
                }
            }
            Ok(k)
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::walks::{awk_feature_map, awk_inner};

    #[test]
    fn matches_feature_map_inner_products() {
        let tri = Graph::unlabeled(3, vec![(0, 1), (1, 2), (0, 2)]).unwrap();
        let path = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3)]).unwrap();
        let star = Graph::unlabeled(4, vec![(0, 1), (0, 2), (0, 3)]).unwrap();
        let masks = vec![tri.clone(), star.clone()];
        let out = gknn_awk_layer(&path, &masks, 3).unwrap();
        let fp = awk_feature_map(&path, 3).unwrap();
        for (k, m) in out.iter().zip(&masks) {
            let direct = awk_inner(&fp, &awk_feature_map(m, 3).unwrap());
            assert!((k - direct).abs() < 1e-12);
        }
    }
}

use std::collections::BTreeMap;

use ndarray::{Array1, Array2, ArrayView2};
use rand::Rng;
use rayon::prelude::*;

use super::mask::{sample_mask, StructuralMask};
use super::wl::{frozen_histogram, histogram_dot, wl_refine, wl_refine_frozen, WlDictionary};
use crate::error::{Error, Result};
use crate::graph::{extract_r_hop, Graph};
use crate::rng;
use crate::scalar::Scalar;
use crate::walks::{
    EmbeddingMeta, EmbeddingMethod, KernelEmbeddingMeta, StructuralEmbedding,
    EMBEDDING_FORMAT_VERSION,
};

/// WL label counts, over every depth, of each node's r-hop neighbourhood.
#[derive(Debug, Clone)]
pub struct NeighborhoodIndex {
    pub radius: usize,
    pub depth: usize,
    /// `graphs[g][v]` lists `(label id, count)` pairs sorted by id.
    pub graphs: Vec<Vec<Vec<(u32, f64)>>>,
}

/// Refines every r-hop neighbourhood of every graph into one shared dictionary.
pub fn neighborhood_histograms(
    dict: &mut WlDictionary,
    graphs: &[Graph],
    radius: usize,
    depth: usize,
) -> NeighborhoodIndex {
    let graphs = graphs
        .iter()
        .map(|g| {
            (0..g.node_count())
                .map(|v| {
                    let sub = extract_r_hop(g, v, radius);
                    let f = wl_refine(dict, &sub.graph, depth);
                    let mut merged: BTreeMap<u32, u64> = BTreeMap::new();
                    for h in &f.histograms {
                        for (&k, &c) in h {
                            *merged.entry(k).or_insert(0) += c;
                        }
                    }
                    merged.into_iter().map(|(k, c)| (k, c as f64)).collect()
                })
                .collect()
        })
        .collect();
    NeighborhoodIndex {
        radius,
        depth,
        graphs,
    }
}

/// `nodes × masks` responses: each node's neighbourhood histogram dotted with
/// each column of the `labels × masks` mask histogram matrix.
pub fn responses<T: Scalar>(nodes: &[Vec<(u32, f64)>], mask_hist: ArrayView2<T>) -> Array2<T> {
    let m = mask_hist.ncols();
    let mut z = Array2::zeros((nodes.len(), m));
    for (v, hist) in nodes.iter().enumerate() {
        let mut row = z.row_mut(v);
        for &(id, c) in hist {
            row.scaled_add(T::of(c), &mask_hist.row(id as usize));
        }
    }
    z
}

/// Gradient of `Σ d_z ⊙ responses(nodes, H)` with respect to `H`, added to `acc`.
pub fn responses_backward<T: Scalar>(
    nodes: &[Vec<(u32, f64)>],
    d_z: ArrayView2<T>,
    acc: &mut Array2<T>,
) {
    for (v, hist) in nodes.iter().enumerate() {
        for &(id, c) in hist {
            acc.row_mut(id as usize).scaled_add(T::of(c), &d_z.row(v));
        }
    }
}

/// Monte Carlo estimate of the expected WL kernel between each mask and the
/// r-hop neighbourhood of `v`, from `samples` discrete draws per mask.
pub fn expected_kernel_response<T: Scalar, R: Rng + ?Sized>(
    g: &Graph,
    v: usize,
    masks: &[StructuralMask<T>],
    radius: usize,
    depth: usize,
    samples: usize,
    tau: T,
    rng: &mut R,
) -> Result<Vec<f64>> {
    if masks.is_empty() || samples == 0 {
        return Err(Error::Config(
            "need at least one mask and one sample".into(),
        ));
    }
    let mut dict = WlDictionary::new();
    let sub = extract_r_hop(g, v, radius);
    let target = wl_refine(&mut dict, &sub.graph, depth);
    Ok(masks
        .iter()
        .map(|mask| {
            let total: f64 = (0..samples)
                .map(|_| {
                    let (drawn, _) = sample_mask(mask, tau, rng);
                    let f = wl_refine(&mut dict, &drawn, depth);
                    f.histograms
                        .iter()
                        .zip(&target.histograms)
                        .map(|(a, b)| histogram_dot(a, b))
                        .sum::<f64>()
                })
                .sum();
            total / samples as f64
        })
        .collect())
}

/// Mean hard WL histogram of each mask over `samples` draws, as a
/// `labels × masks` matrix. Draw `s` of mask `j` uses the stream `(seed, j, s)`.
pub fn hard_mask_histograms<T: Scalar>(
    dict: &WlDictionary,
    masks: &[StructuralMask<T>],
    depth: usize,
    samples: usize,
    tau: T,
    seed: u64,
) -> Array2<f64> {
    let columns: Vec<Array1<f64>> = masks
        .par_iter()
        .enumerate()
        .map(|(j, mask)| {
            let mut col = Array1::zeros(dict.len());
            for s in 0..samples {
                let mut r = rng::stream(seed, &[0x4a7d, j as u64, s as u64]);
                let (drawn, _) = sample_mask(mask, tau, &mut r);
                for (id, c) in frozen_histogram(&wl_refine_frozen(dict, &drawn, depth)) {
                    col[id as usize] += c as f64;
                }
            }
            col / samples as f64
        })
        .collect();
    let mut out = Array2::zeros((dict.len(), masks.len()));
    for (j, c) in columns.into_iter().enumerate() {
        out.column_mut(j).assign(&c);
    }
    out
}

/// Frozen per-node kernel responses for every graph.
///
/// The draws of each mask are shared by all nodes, so nodes with identical
/// labelled neighbourhoods get identical vectors.
pub fn kernel_node_embeddings<T: Scalar>(
    graphs: &[Graph],
    masks: &[StructuralMask<T>],
    radius: usize,
    depth: usize,
    samples: usize,
    tau: T,
    seed: u64,
) -> Result<StructuralEmbedding> {
    if masks.is_empty() || samples == 0 {
        return Err(Error::Config(
            "need at least one mask and one sample".into(),
        ));
    }
    let mut dict = WlDictionary::new();
    let index = neighborhood_histograms(&mut dict, graphs, radius, depth);
    let hist = hard_mask_histograms(&dict, masks, depth, samples, tau, seed);
    let graphs = index
        .graphs
        .iter()
        .map(|nodes| responses(nodes, hist.view()))
        .collect();
    Ok(StructuralEmbedding {
        meta: EmbeddingMeta {
            format_version: EMBEDDING_FORMAT_VERSION,
            method: EmbeddingMethod::Gknn,
            l: 0,
            r: 0,
            w: 0,
            d: masks.len(),
            seed,
            vocab: Vec::new(),
            kernel: Some(KernelEmbeddingMeta {
                radius,
                depth,
                samples,
                masks: masks.len(),
            }),
        },
        graphs,
    })
}

use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{slice, slice_mut, Parameters};
use crate::scalar::{sigmoid, Scalar};

pub fn global_mean_pool<T: Scalar>(h: ArrayView2<T>) -> Result<Array1<T>> {
    if h.nrows() == 0 {
        return Err(Error::Config("cannot pool an empty graph".into()));
    }
    Ok(h.mean_axis(Axis(0)).expect("non-empty"))
}

/// Edge scoring weights for one contraction stage. The score of edge
/// `{u, v}` is `sigmoid(w[..p]·h_u + w[p..]·h_v + b)` averaged over both
/// orientations, so it does not depend on how the edge is stored.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct EdgePoolParams<T: Scalar> {
    pub w: Array1<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> EdgePoolParams<T> {
    pub fn init(p: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (p as f64).sqrt();
        Self {
            w: Array1::from_shape_simple_fn(2 * p, || T::of(rng.random_range(-bound..bound))),
            b: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            w: Array1::zeros(self.w.len()),
            b: Array1::zeros(1),
        }
    }

    fn direction(&self) -> Array1<T> {
        let p = self.w.len() / 2;
        let half = T::of(0.5);
        Array1::from_shape_fn(p, |i| half * (self.w[i] + self.w[p + i]))
    }
}

impl<T: Scalar> Parameters<T> for EdgePoolParams<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        f(slice(&self.w));
        f(slice(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        f(slice_mut(&mut self.w));
        f(slice_mut(&mut self.b));
    }
}

/// Result of one contraction stage. `mapping[v]` is the coarse node that
/// fine node `v` belongs to; `merges` lists the contracted edges with their
/// scores in coarse-node order.
#[derive(Debug, Clone)]
pub struct PoolStage<T: Scalar> {
    pub features: Array2<T>,
    pub graph: Graph,
    pub mapping: Vec<usize>,
    pub merges: Vec<(usize, usize, T)>,
    /// True when the input had no edges and the stage passed it through.
    pub identity: bool,
}

impl<T: Scalar> PoolStage<T> {
    pub fn cluster_count(&self) -> usize {
        self.graph.node_count()
    }

    /// Fine nodes of each coarse node, in coarse order.
    pub fn members(&self) -> Vec<Vec<usize>> {
        let mut out = vec![Vec::new(); self.cluster_count()];
        for (v, &c) in self.mapping.iter().enumerate() {
            out[c].push(v);
        }
        out
    }
}

/// Scores every edge, contracts a greedy maximal matching taken in
/// descending score order (ties by edge order) and merges each matched pair
/// into `s·(h_u + h_v)`. Unmatched nodes keep their features.
pub fn edge_pool_stage<T: Scalar>(
    h: ArrayView2<T>,
    g: &Graph,
    params: &EdgePoolParams<T>,
) -> Result<PoolStage<T>> {
    let n = g.node_count();
    if h.nrows() != n || h.ncols() * 2 != params.w.len() {
        return Err(Error::Config(format!(
            "pooling expects {} rows of width {}, got {}x{}",
            n,
            params.w.len() / 2,
            h.nrows(),
            h.ncols()
        )));
    }
    if g.edge_count() == 0 {
        return Ok(PoolStage {
            features: h.to_owned(),
            graph: g.clone(),
            mapping: (0..n).collect(),
            merges: Vec::new(),
            identity: true,
        });
    }
    let dir = params.direction();
    let scores: Vec<T> = g
        .edges()
        .iter()
        .map(|&(u, v)| sigmoid((&h.row(u) + &h.row(v)).dot(&dir) + params.b[0]))
        .collect();
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| {
        scores[b]
            .partial_cmp(&scores[a])
            .unwrap_or(std::cmp::Ordering::Equal)
            .then(a.cmp(&b))
    });
    let mut partner: Vec<Option<(usize, T)>> = vec![None; n];
    let mut taken = vec![false; n];
    for e in order {
        let (u, v) = g.edges()[e];
        if taken[u] || taken[v] {
            continue;
        }
        taken[u] = true;
        taken[v] = true;
        partner[u] = Some((v, scores[e]));
        partner[v] = Some((u, scores[e]));
    }

    let mut mapping = vec![usize::MAX; n];
    let mut merges = Vec::new();
    let mut rows: Vec<Array1<T>> = Vec::new();
    for v in 0..n {
        if mapping[v] != usize::MAX {
            continue;
        }
        let c = rows.len();
        mapping[v] = c;
        match partner[v] {
            Some((w, s)) => {
                mapping[w] = c;
                merges.push((v, w, s));
                rows.push((&h.row(v) + &h.row(w)) * s);
            }
            None => {
                merges.push((v, v, T::one()));
                rows.push(h.row(v).to_owned());
            }
        }
    }
    let p = h.ncols();
    let mut features = Array2::zeros((rows.len(), p));
    for (c, r) in rows.iter().enumerate() {
        features.row_mut(c).assign(r);
    }
    let coarse_edges = g
        .edges()
        .iter()
        .map(|&(u, v)| (mapping[u], mapping[v]))
        .filter(|(a, b)| a != b)
        .collect::<Vec<_>>();
    let graph = Graph::unlabeled(rows.len(), coarse_edges)?;
    merges.retain(|&(u, v, _)| u != v);
    Ok(PoolStage {
        features,
        graph,
        mapping,
        merges,
        identity: false,
    })
}

/// Backpropagates through a stage with the matching held fixed. Returns the
/// gradient with respect to the stage input and accumulates into `grad`.
pub fn edge_pool_backward<T: Scalar>(
    h: ArrayView2<T>,
    params: &EdgePoolParams<T>,
    stage: &PoolStage<T>,
    d_out: ArrayView2<T>,
    grad: &mut EdgePoolParams<T>,
) -> Array2<T> {
    let mut dh = Array2::zeros(h.raw_dim());
    if stage.identity {
        dh.assign(&d_out);
        return dh;
    }
    let p = h.ncols();
    let dir = params.direction();
    let half = T::of(0.5);
    let mut merged = vec![false; h.nrows()];
    for &(u, v, s) in &stage.merges {
        merged[u] = true;
        merged[v] = true;
        let c = stage.mapping[u];
        let d = d_out.row(c);
        let sum = &h.row(u) + &h.row(v);
        let dlogit = d.dot(&sum) * s * (T::one() - s);
        for i in 0..p {
            let gw = half * dlogit * sum[i];
            grad.w[i] += gw;
            grad.w[p + i] += gw;
        }
        grad.b[0] += dlogit;
        let row = &d * s + &dir * dlogit;
        dh.row_mut(u).assign(&row);
        dh.row_mut(v).assign(&row);
    }
    for v in 0..h.nrows() {
        if !merged[v] {
            dh.row_mut(v).assign(&d_out.row(stage.mapping[v]));
        }
    }
    dh
}

/// Mean of each cluster's rows; used to carry structural vectors down the
/// hierarchy.
pub fn cluster_mean<T: Scalar>(x: ArrayView2<T>, stage: &PoolStage<T>) -> Array2<T> {
    let mut out = Array2::zeros((stage.cluster_count(), x.ncols()));
    let mut counts = vec![0usize; stage.cluster_count()];
    for (v, &c) in stage.mapping.iter().enumerate() {
        let mut row = out.row_mut(c);
        row += &x.row(v);
        counts[c] += 1;
    }
    for (mut row, &k) in out.rows_mut().into_iter().zip(&counts) {
        row /= T::of(k as f64);
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    #[test]
    fn mean_pool_basics() {
        let x = array![[1.0, 0.0], [0.0, 1.0]];
        assert_eq!(global_mean_pool(x.view()).unwrap(), array![0.5, 0.5]);
        let same = Array2::from_elem((3, 2), 0.25);
        assert_eq!(global_mean_pool(same.view()).unwrap(), array![0.25, 0.25]);
        assert!(global_mean_pool(Array2::<f64>::zeros((0, 2)).view()).is_err());
    }

    #[test]
    fn two_nodes_merge_into_one() {
        let g = Graph::unlabeled(2, vec![(0, 1)]).unwrap();
        let params = EdgePoolParams::<f64> {
            w: array![0.3, -0.2, 0.1, 0.4],
            b: array![0.05],
        };
        let h = array![[1.0, 2.0], [0.5, -1.0]];
        let st = edge_pool_stage(h.view(), &g, &params).unwrap();
        let s =
            1.0 / (1.0 + (-(0.5 * (0.3 + 0.1) * 1.5 + 0.5 * (-0.2 + 0.4) * 1.0 + 0.05f64)).exp());
        assert_eq!(st.cluster_count(), 1);
        assert!((st.features[[0, 0]] - s * 1.5).abs() < 1e-12);
        assert!((st.features[[0, 1]] - s * 1.0).abs() < 1e-12);
        assert_eq!(st.graph.edge_count(), 0);
    }

    #[test]
    fn symmetric_four_cycle_pools_to_two() {
        let g = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3), (0, 3)]).unwrap();
        let params = EdgePoolParams::<f64>::init(3, &mut rng::stream(0, &[]));
        let h = Array2::from_elem((4, 3), 0.5);
        let st = edge_pool_stage(h.view(), &g, &params).unwrap();
        // All scores tie, so edges are taken in storage order: (0,1) then (2,3).
        assert_eq!(st.mapping, vec![0, 0, 1, 1]);
        assert_eq!(st.graph.edges(), &[(0, 1)]);
    }

    #[test]
    fn edgeless_graph_is_passed_through() {
        let g = Graph::unlabeled(3, vec![]).unwrap();
        let params = EdgePoolParams::<f64>::init(2, &mut rng::stream(0, &[]));
        let h = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let st = edge_pool_stage(h.view(), &g, &params).unwrap();
        assert!(st.identity);
        assert_eq!(st.features, h);
    }

    fn stages_until_small(g: Graph) -> usize {
        let params = EdgePoolParams::<f64>::init(2, &mut rng::stream(1, &[]));
        let mut h = Array2::from_shape_fn((g.node_count(), 2), |(i, j)| {
            ((i * 7 + j * 3) % 5) as f64 * 0.1
        });
        let mut g = g;
        let mut stages = 0;
        while g.node_count() > 2 {
            let st = edge_pool_stage(h.view(), &g, &params).unwrap();
            assert!(st.cluster_count() < g.node_count());
            h = st.features;
            g = st.graph;
            stages += 1;
        }
        stages
    }

    #[test]
    fn contraction_terminates_within_log_bound_on_paths_cycles_and_small_grids() {
        for n in 3..40usize {
            let bound = (n as f64).log2().ceil() as usize + 1;
            let path = Graph::unlabeled(n, (0..n - 1).map(|i| (i, i + 1))).unwrap();
            assert!(stages_until_small(path) <= bound, "path {n}");
            let cycle = Graph::unlabeled(n, (0..n).map(|i| (i, (i + 1) % n))).unwrap();
            assert!(stages_until_small(cycle) <= bound, "cycle {n}");
        }
        // Larger grids can need more stages: on a 6x6 grid greedy matching leaves
        // enough nodes unmatched that eight stages are needed.
        for side in 2..6usize {
            let idx = |r: usize, c: usize| r * side + c;
            let mut edges = Vec::new();
            for r in 0..side {
                for c in 0..side {
                    if c + 1 < side {
                        edges.push((idx(r, c), idx(r, c + 1)));
                    }
                    if r + 1 < side {
                        edges.push((idx(r, c), idx(r + 1, c)));
                    }
                }
            }
            let n = side * side;
            let bound = (n as f64).log2().ceil() as usize + 1;
            let s = stages_until_small(Graph::unlabeled(n, edges).unwrap());
            assert!(s <= bound, "grid {side}");
        }
    }

    #[test]
    fn stars_contract_one_edge_per_stage() {
        let n = 9;
        let star = Graph::unlabeled(n, (1..n).map(|i| (0, i))).unwrap();
        assert_eq!(stages_until_small(star), 1 + (n - 3));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let g = Graph::unlabeled(5, vec![(0, 1), (1, 2), (2, 3), (3, 4), (1, 3)]).unwrap();
        let mut r = rng::stream(2, &[]);
        let params = EdgePoolParams::<f64>::init(3, &mut r);
        let h = Array2::from_shape_simple_fn((5, 3), || r.random_range(-1.0..1.0));
        let st = edge_pool_stage(h.view(), &g, &params).unwrap();
        let w = Array2::from_shape_simple_fn(st.features.raw_dim(), || r.random_range(-1.0..1.0));
        let loss = |p: &EdgePoolParams<f64>, x: &Array2<f64>| {
            let s = edge_pool_stage(x.view(), &g, p).unwrap();
            assert_eq!(s.mapping, st.mapping);
            (s.features * &w).sum()
        };
        let mut grad = params.zeros_like();
        let dh = edge_pool_backward(h.view(), &params, &st, w.view(), &mut grad);
        let eps = 1e-6;
        let flat = params.to_flat();
        for (i, gi) in grad.to_flat().into_iter().enumerate() {
            let mut p = params.clone();
            let mut f = flat.clone();
            f[i] += eps;
            p.set_flat(&f);
            let up = loss(&p, &h);
            f[i] -= 2.0 * eps;
            p.set_flat(&f);
            let fd = (up - loss(&p, &h)) / (2.0 * eps);
            assert!((fd - gi).abs() < 1e-7 * (1.0 + fd.abs()), "param {i}");
        }
        for i in 0..5 {
            for j in 0..3 {
                let mut x = h.clone();
                x[[i, j]] += eps;
                let up = loss(&params, &x);
                x[[i, j]] -= 2.0 * eps;
                let fd = (up - loss(&params, &x)) / (2.0 * eps);
                assert!((fd - dh[[i, j]]).abs() < 1e-7 * (1.0 + fd.abs()));
            }
        }
    }
}

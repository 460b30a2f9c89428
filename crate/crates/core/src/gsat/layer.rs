use ndarray::{s, Array1, Array2, ArrayView2, Axis};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::nn::{slice, slice_mut, Activation, Parameters};
use crate::scalar::Scalar;

/// Nonlinearity applied to attention pre-activations.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AttentionActivation {
    Relu,
    LeakyRelu(f64),
}

impl AttentionActivation {
    #[inline]
    fn apply<T: Scalar>(self, x: T) -> T {
        match self {
            AttentionActivation::Relu => x.max(T::zero()),
            AttentionActivation::LeakyRelu(slope) => {
                if x > T::zero() {
                    x
                } else {
                    T::of(slope) * x
                }
            }
        }
    }

    #[inline]
    fn grad<T: Scalar>(self, x: T) -> T {
        match self {
            AttentionActivation::Relu => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::zero()
                }
            }
            AttentionActivation::LeakyRelu(slope) => {
                if x > T::zero() {
                    T::one()
                } else {
                    T::of(slope)
                }
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct LayerOptions {
    pub attention: AttentionActivation,
    /// Nonlinearity on each head's aggregated message.
    pub message: Activation,
}

impl Default for LayerOptions {
    fn default() -> Self {
        Self {
            attention: AttentionActivation::Relu,
            message: Activation::Identity,
        }
    }
}

/// One attention head: `w_s` projects structural vectors for the attention
/// logits, `w_o` projects the features that are passed as messages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct HeadParams<T: Scalar> {
    pub w_s: Array2<T>,
    pub w_o: Array2<T>,
    pub a: Array1<T>,
}

/// Heads plus the shared combine `ReLU(m V + b)` applied to their mean message.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct GsatLayerParams<T: Scalar> {
    pub heads: Vec<HeadParams<T>>,
    pub v: Array2<T>,
    pub b: Array1<T>,
}

impl<T: Scalar> GsatLayerParams<T> {
    /// Weights uniform in `±1/sqrt(p)`, zero bias.
    pub fn init(d_s: usize, d_in: usize, p: usize, heads: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (p as f64).sqrt();
        let mut u = |shape: (usize, usize)| {
            Array2::from_shape_simple_fn(shape, || T::of(rng.random_range(-bound..bound)))
        };
        let heads = (0..heads)
            .map(|_| HeadParams {
                w_s: u((d_s, p)),
                w_o: u((d_in, p)),
                a: u((2 * p, 1)).into_shape_with_order(2 * p).unwrap(),
            })
            .collect();
        let v = u((p, p));
        Self {
            heads,
            v,
            b: Array1::zeros(p),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            heads: self
                .heads
                .iter()
                .map(|h| HeadParams {
                    w_s: Array2::zeros(h.w_s.raw_dim()),
                    w_o: Array2::zeros(h.w_o.raw_dim()),
                    a: Array1::zeros(h.a.len()),
                })
                .collect(),
            v: Array2::zeros(self.v.raw_dim()),
            b: Array1::zeros(self.b.len()),
        }
    }

    pub fn hidden(&self) -> usize {
        self.v.nrows()
    }

    pub fn structural_dim(&self) -> usize {
        self.heads[0].w_s.nrows()
    }

    pub fn input_dim(&self) -> usize {
        self.heads[0].w_o.nrows()
    }

    fn check(&self, h: ArrayView2<T>, hs: ArrayView2<T>, g: &Graph) -> Result<()> {
        if h.nrows() != g.node_count() || hs.nrows() != g.node_count() {
            return Err(Error::Config(format!(
                "layer got {} feature rows and {} structural rows for {} nodes",
                h.nrows(),
                hs.nrows(),
                g.node_count()
            )));
        }
        if h.ncols() != self.input_dim() || hs.ncols() != self.structural_dim() {
            return Err(Error::Config(format!(
                "layer expects feature width {} and structural width {}, got {} and {}",
                self.input_dim(),
                self.structural_dim(),
                h.ncols(),
                hs.ncols()
            )));
        }
        Ok(())
    }
}

impl<T: Scalar> Parameters<T> for GsatLayerParams<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        for h in &self.heads {
            f(slice(&h.w_s));
            f(slice(&h.w_o));
            f(slice(&h.a));
        }
        f(slice(&self.v));
        f(slice(&self.b));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        for h in &mut self.heads {
            f(slice_mut(&mut h.w_s));
            f(slice_mut(&mut h.w_o));
            f(slice_mut(&mut h.a));
        }
        f(slice_mut(&mut self.v));
        f(slice_mut(&mut self.b));
    }
}

/// Attention coefficients per head, aligned with the graph's CSR neighbour
/// slots: `heads[k][g.offsets()[u] + i]` weighs the `i`-th neighbour of `u`.
#[derive(Debug, Clone, PartialEq)]
pub struct AttentionMatrix<T: Scalar> {
    pub heads: Vec<Vec<T>>,
}

impl<T: Scalar> AttentionMatrix<T> {
    pub fn row<'a>(&'a self, g: &Graph, head: usize, u: usize) -> &'a [T] {
        let o = g.offsets();
        &self.heads[head][o[u]..o[u + 1]]
    }
}

/// Pre-activations and softmax weights over each neighbourhood given the
/// per-node halves `e` (source) and `f` (neighbour) of the attention score.
fn neighbourhood_softmax<T: Scalar>(
    g: &Graph,
    e: &Array1<T>,
    f: &Array1<T>,
    act: AttentionActivation,
) -> (Vec<T>, Vec<T>) {
    let nbrs = g.csr_neighbors();
    let offsets = g.offsets();
    let mut pre = vec![T::zero(); nbrs.len()];
    let mut alpha = vec![T::zero(); nbrs.len()];
    for u in 0..g.node_count() {
        let (lo, hi) = (offsets[u], offsets[u + 1]);
        if lo == hi {
            continue;
        }
        let mut max = T::neg_infinity();
        for k in lo..hi {
            pre[k] = e[u] + f[nbrs[k]];
            alpha[k] = act.apply(pre[k]);
            max = max.max(alpha[k]);
        }
        let mut sum = T::zero();
        for a in &mut alpha[lo..hi] {
            *a = (*a - max).exp();
            sum += *a;
        }
        for a in &mut alpha[lo..hi] {
            *a /= sum;
        }
    }
    (pre, alpha)
}

fn aggregate<T: Scalar>(g: &Graph, alpha: &[T], o: &Array2<T>) -> Array2<T> {
    let nbrs = g.csr_neighbors();
    let offsets = g.offsets();
    let mut msg = Array2::zeros(o.raw_dim());
    for u in 0..g.node_count() {
        let (lo, hi) = (offsets[u], offsets[u + 1]);
        let mut row = msg.row_mut(u);
        if lo == hi {
            row.assign(&o.row(u));
            continue;
        }
        for k in lo..hi {
            row.scaled_add(alpha[k], &o.row(nbrs[k]));
        }
    }
    msg
}

fn split_a<T: Scalar>(a: &Array1<T>) -> (ndarray::ArrayView1<'_, T>, ndarray::ArrayView1<'_, T>) {
    let p = a.len() / 2;
    (a.slice(s![..p]), a.slice(s![p..]))
}

/// Attention from structural vectors: softmax over `N(u)` of
/// `act(a1 · W_s h_s(u) + a2 · W_s h_s(v))` for each head.
pub fn attention_coefficients<T: Scalar>(
    hs: ArrayView2<T>,
    params: &GsatLayerParams<T>,
    g: &Graph,
    options: &LayerOptions,
) -> AttentionMatrix<T> {
    AttentionMatrix {
        heads: params
            .heads
            .iter()
            .map(|head| {
                let s = hs.dot(&head.w_s);
                let (a1, a2) = split_a(&head.a);
                neighbourhood_softmax(g, &s.dot(&a1), &s.dot(&a2), options.attention).1
            })
            .collect(),
    }
}

struct HeadCache<T: Scalar> {
    s: Array2<T>,
    o: Array2<T>,
    pre: Vec<T>,
    alpha: Vec<T>,
    msg: Array2<T>,
}

pub struct LayerCache<T: Scalar> {
    h: Array2<T>,
    hs: Array2<T>,
    heads: Vec<HeadCache<T>>,
    m: Array2<T>,
    z: Array2<T>,
}

impl<T: Scalar> LayerCache<T> {
    pub fn attention(&self) -> AttentionMatrix<T> {
        AttentionMatrix {
            heads: self.heads.iter().map(|h| h.alpha.clone()).collect(),
        }
    }
}

/// One GSAT layer: structural attention gating messages of projected
/// features, heads averaged, then `ReLU(m V + b)`. Isolated nodes receive
/// their own message. `hs` passes through unchanged.
pub fn gsat_layer_forward<T: Scalar>(
    h: ArrayView2<T>,
    hs: ArrayView2<T>,
    params: &GsatLayerParams<T>,
    g: &Graph,
    options: &LayerOptions,
) -> Result<(Array2<T>, LayerCache<T>)> {
    params.check(h, hs, g)?;
    let n = g.node_count();
    let p = params.hidden();
    let mut m = Array2::zeros((n, p));
    let mut heads = Vec::with_capacity(params.heads.len());
    for head in &params.heads {
        let s = hs.dot(&head.w_s);
        let o = h.dot(&head.w_o);
        let (a1, a2) = split_a(&head.a);
        let (pre, alpha) = neighbourhood_softmax(g, &s.dot(&a1), &s.dot(&a2), options.attention);
        let msg = aggregate(g, &alpha, &o);
        m += &msg.mapv(|x| options.message.apply(x));
        heads.push(HeadCache {
            s,
            o,
            pre,
            alpha,
            msg,
        });
    }
    m /= T::of(params.heads.len() as f64);
    let z = m.dot(&params.v) + &params.b;
    let out = z.mapv(|x| x.max(T::zero()));
    Ok((
        out,
        LayerCache {
            h: h.to_owned(),
            hs: hs.to_owned(),
            heads,
            m,
            z,
        },
    ))
}

/// Accumulates parameter gradients into `grad` and returns `dL/dh`.
/// Structural inputs receive no gradient.
pub fn gsat_layer_backward<T: Scalar>(
    params: &GsatLayerParams<T>,
    cache: &LayerCache<T>,
    g: &Graph,
    options: &LayerOptions,
    d_out: ArrayView2<T>,
    grad: &mut GsatLayerParams<T>,
) -> Array2<T> {
    let mut dz = d_out.to_owned();
    dz.zip_mut_with(&cache.z, |d, &z| {
        if z <= T::zero() {
            *d = T::zero();
        }
    });
    grad.v += &cache.m.t().dot(&dz);
    grad.b += &dz.sum_axis(Axis(0));
    let dm = dz.dot(&params.v.t()) / T::of(params.heads.len() as f64);

    let nbrs = g.csr_neighbors();
    let offsets = g.offsets();
    let mut dh = Array2::zeros(cache.h.raw_dim());
    for ((head, hc), hg) in params.heads.iter().zip(&cache.heads).zip(&mut grad.heads) {
        let mut dmsg = dm.clone();
        dmsg.zip_mut_with(&hc.msg, |d, &x| *d = *d * options.message.grad(x));
        let mut d_o = Array2::<T>::zeros(hc.o.raw_dim());
        let n = g.node_count();
        let mut de = Array1::<T>::zeros(n);
        let mut df = Array1::<T>::zeros(n);
        let mut d_alpha = vec![T::zero(); nbrs.len()];
        for u in 0..n {
            let (lo, hi) = (offsets[u], offsets[u + 1]);
            let du = dmsg.row(u);
            if lo == hi {
                let mut row = d_o.row_mut(u);
                row += &du;
                continue;
            }
            let mut inner = T::zero();
            for k in lo..hi {
                let v = nbrs[k];
                d_alpha[k] = du.dot(&hc.o.row(v));
                d_o.row_mut(v).scaled_add(hc.alpha[k], &du);
                inner += hc.alpha[k] * d_alpha[k];
            }
            for k in lo..hi {
                let dpre = hc.alpha[k] * (d_alpha[k] - inner) * options.attention.grad(hc.pre[k]);
                de[u] += dpre;
                df[nbrs[k]] += dpre;
            }
        }
        let p = head.a.len() / 2;
        let (a1, a2) = split_a(&head.a);
        {
            let mut ga = hg.a.slice_mut(s![..p]);
            ga += &hc.s.t().dot(&de);
        }
        {
            let mut ga = hg.a.slice_mut(s![p..]);
            ga += &hc.s.t().dot(&df);
        }
        let ds = outer(&de, &a1) + outer(&df, &a2);
        hg.w_s += &cache.hs.t().dot(&ds);
        hg.w_o += &cache.h.t().dot(&d_o);
        dh += &d_o.dot(&head.w_o.t());
    }
    dh
}

fn outer<T: Scalar>(x: &Array1<T>, y: &ndarray::ArrayView1<T>) -> Array2<T> {
    Array2::from_shape_fn((x.len(), y.len()), |(i, j)| x[i] * y[j])
}

/// Structure-blind GAT layer: attention from the projected features
/// themselves with LeakyReLU(0.2), otherwise the same combine. `W_s` is unused.
pub fn gat_baseline_forward<T: Scalar>(
    h: ArrayView2<T>,
    params: &GsatLayerParams<T>,
    g: &Graph,
    message: Activation,
) -> Result<Array2<T>> {
    if h.nrows() != g.node_count() || h.ncols() != params.input_dim() {
        return Err(Error::Config(
            "baseline layer input does not match its parameters".into(),
        ));
    }
    let p = params.hidden();
    let mut m = Array2::zeros((g.node_count(), p));
    for head in &params.heads {
        let o = h.dot(&head.w_o);
        let (a1, a2) = split_a(&head.a);
        let (_, alpha) = neighbourhood_softmax(
            g,
            &o.dot(&a1),
            &o.dot(&a2),
            AttentionActivation::LeakyRelu(0.2),
        );
        m += &aggregate(g, &alpha, &o).mapv(|x| message.apply(x));
    }
    m /= T::of(params.heads.len() as f64);
    Ok((m.dot(&params.v) + &params.b).mapv(|x| x.max(T::zero())))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng;
    use ndarray::array;

    fn path3() -> Graph {
        Graph::unlabeled(3, vec![(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn single_neighbour_gets_full_weight() {
        let g = path3();
        let params = GsatLayerParams::<f64>::init(2, 2, 3, 2, &mut rng::stream(0, &[]));
        let hs = array![[0.1, 0.2], [0.3, -0.4], [1.0, 0.0]];
        let att = attention_coefficients(hs.view(), &params, &g, &LayerOptions::default());
        for k in 0..2 {
            assert_eq!(att.row(&g, k, 0), &[1.0]);
            assert_eq!(att.row(&g, k, 2), &[1.0]);
            let mid = att.row(&g, k, 1);
            assert!((mid.iter().sum::<f64>() - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn equal_structure_gives_uniform_attention() {
        let g = Graph::unlabeled(4, vec![(0, 1), (0, 2), (0, 3)]).unwrap();
        let params = GsatLayerParams::<f64>::init(2, 2, 3, 1, &mut rng::stream(1, &[]));
        let hs = Array2::from_elem((4, 2), 0.7);
        let att = attention_coefficients(hs.view(), &params, &g, &LayerOptions::default());
        for &a in att.row(&g, 0, 0) {
            assert!((a - 1.0 / 3.0).abs() < 1e-12);
        }
    }

    #[test]
    fn zero_message_projection_outputs_relu_bias() {
        let g = path3();
        let mut params = GsatLayerParams::<f64>::init(2, 2, 2, 2, &mut rng::stream(2, &[]));
        for h in &mut params.heads {
            h.w_o.fill(0.0);
        }
        params.b = array![0.5, -0.5];
        let x = array![[1.0, 2.0], [3.0, 4.0], [5.0, 6.0]];
        let (out, _) =
            gsat_layer_forward(x.view(), x.view(), &params, &g, &LayerOptions::default()).unwrap();
        for row in out.rows() {
            assert_eq!(row.to_vec(), vec![0.5, 0.0]);
        }
    }

    #[test]
    fn isolated_node_uses_its_own_message() {
        let g = Graph::unlabeled(1, vec![]).unwrap();
        let params = GsatLayerParams::<f64>::init(1, 2, 2, 1, &mut rng::stream(3, &[]));
        let x = array![[0.4, -0.2]];
        let hs = array![[1.0]];
        let (out, _) =
            gsat_layer_forward(x.view(), hs.view(), &params, &g, &LayerOptions::default()).unwrap();
        let want =
            (x.dot(&params.heads[0].w_o).dot(&params.v) + &params.b).mapv(|v: f64| v.max(0.0));
        assert_eq!(out, want);
    }

    /// Hand-worked forward pass on the path 0-1-2 with p = 2 and one head.
    #[test]
    fn hand_computed_path() {
        let g = path3();
        let params = GsatLayerParams {
            heads: vec![HeadParams {
                w_s: array![[1.0, 0.0], [0.0, 1.0]],
                w_o: array![[1.0, 0.0], [0.0, 2.0]],
                a: array![1.0, 0.0, 0.0, 1.0],
            }],
            v: array![[1.0, 0.0], [0.0, 1.0]],
            b: array![0.0, -1.0],
        };
        let hs = array![[1.0, 0.0], [0.0, 0.0], [0.0, 1.0]];
        let x = array![[1.0, 0.0], [0.0, 1.0], [1.0, 1.0]];
        // Node 1 scores neighbour 0 with ReLU(0 + 0) = 0 and neighbour 2 with
        // ReLU(0 + 1) = 1, so alpha = (1, e) / (1 + e). W_o x rows: (1,0), (0,2), (1,2).
        let e = std::f64::consts::E;
        let m1 = [(1.0 + e) / (1.0 + e), 2.0 * e / (1.0 + e)];
        let (out, _) =
            gsat_layer_forward(x.view(), hs.view(), &params, &g, &LayerOptions::default()).unwrap();
        let want = array![[0.0, 1.0], [m1[0], m1[1] - 1.0], [0.0, 1.0]];
        for (a, b) in out.iter().zip(want.iter()) {
            assert!((a - b).abs() < 1e-12, "{out} vs {want}");
        }
    }

    #[test]
    fn baseline_is_blind_on_regular_constant_graphs() {
        let g = Graph::unlabeled(5, (0..5).map(|i| (i, (i + 1) % 5))).unwrap();
        let params = GsatLayerParams::<f64>::init(3, 2, 4, 3, &mut rng::stream(4, &[]));
        let x = Array2::from_elem((5, 2), 1.0);
        let out = gat_baseline_forward(x.view(), &params, &g, Activation::Identity).unwrap();
        for row in out.rows() {
            assert_eq!(row, out.row(0));
        }
    }

    #[test]
    fn baseline_differs_from_structural_attention() {
        let g = Graph::unlabeled(4, vec![(0, 1), (1, 2), (2, 3), (0, 2)]).unwrap();
        let params = GsatLayerParams::<f64>::init(2, 2, 3, 1, &mut rng::stream(5, &[]));
        let x = array![[1.0, 0.0], [0.0, 1.0], [0.5, 0.5], [2.0, -1.0]];
        let hs = array![[3.0, 0.0], [0.0, -2.0], [1.0, 1.0], [0.2, 0.1]];
        let opts = LayerOptions {
            attention: AttentionActivation::LeakyRelu(0.2),
            ..Default::default()
        };
        let mut shared = params.clone();
        for h in &mut shared.heads {
            h.w_s = h.w_o.clone();
        }
        let (same, _) = gsat_layer_forward(x.view(), x.view(), &shared, &g, &opts).unwrap();
        let base = gat_baseline_forward(x.view(), &shared, &g, Activation::Identity).unwrap();
        assert!((&same - &base).iter().all(|d| d.abs() < 1e-12));
        let (structural, _) = gsat_layer_forward(x.view(), hs.view(), &shared, &g, &opts).unwrap();
        assert!((&structural - &base).iter().any(|d| d.abs() > 1e-6));
    }

    #[test]
    fn backward_matches_finite_differences() {
        let g = Graph::unlabeled(5, vec![(0, 1), (1, 2), (2, 3), (1, 3), (3, 4)]).unwrap();
        let mut r = rng::stream(6, &[]);
        let params = GsatLayerParams::<f64>::init(3, 2, 4, 2, &mut r);
        let x = Array2::from_shape_simple_fn((5, 2), || r.random_range(-1.0..1.0));
        let hs = Array2::from_shape_simple_fn((5, 3), || r.random_range(-2.0..2.0));
        let w = Array2::from_shape_simple_fn((5, 4), || r.random_range(-1.0..1.0));
        let opts = LayerOptions {
            attention: AttentionActivation::LeakyRelu(0.2),
            message: Activation::Relu,
        };
        let loss = |p: &GsatLayerParams<f64>, x: &Array2<f64>| {
            (gsat_layer_forward(x.view(), hs.view(), p, &g, &opts)
                .unwrap()
                .0
                * &w)
                .sum()
        };
        let (_, cache) = gsat_layer_forward(x.view(), hs.view(), &params, &g, &opts).unwrap();
        let mut grad = params.zeros_like();
        let dx = gsat_layer_backward(&params, &cache, &g, &opts, w.view(), &mut grad);
        let flat = params.to_flat();
        let gf = grad.to_flat();
        let h = 1e-6;
        for i in 0..flat.len() {
            let mut p = params.clone();
            let mut f = flat.clone();
            f[i] += h;
            p.set_flat(&f);
            let up = loss(&p, &x);
            f[i] -= 2.0 * h;
            p.set_flat(&f);
            let fd = (up - loss(&p, &x)) / (2.0 * h);
            assert!(
                (fd - gf[i]).abs() <= 1e-6 * (1.0 + fd.abs()),
                "param {i}: {fd} vs {}",
                gf[i]
            );
        }
        for i in 0..5 {
            for j in 0..2 {
                let mut xp = x.clone();
                xp[[i, j]] += h;
                let up = loss(&params, &xp);
                xp[[i, j]] -= 2.0 * h;
                let fd = (up - loss(&params, &xp)) / (2.0 * h);
                assert!((fd - dx[[i, j]]).abs() <= 1e-6 * (1.0 + fd.abs()));
            }
        }
    }
}

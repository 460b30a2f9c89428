use ndarray::{Array1, Array2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::graph::Graph;
use crate::nn::{slice, slice_mut, Parameters};
use crate::scalar::{sigmoid, Scalar};

/// Stochastic graph on `node_count` nodes: every node pair carries an
/// independent Bernoulli edge logit and every node a categorical label
/// distribution over `alphabet` labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(bound = "")]
pub struct StructuralMask<T: Scalar> {
    pub node_count: usize,
    pub alphabet: usize,
    /// One logit per pair `(i, j)`, `i < j`, in lexicographic order.
    pub edge_logits: Array1<T>,
    pub label_logits: Array2<T>,
}

pub(crate) fn pair_index(n: usize, i: usize, j: usize) -> usize {
    debug_assert!(i < j && j < n);
    i * n - i * (i + 1) / 2 + (j - i - 1)
}

pub(crate) fn pairs(n: usize) -> impl Iterator<Item = (usize, usize)> {
    (0..n).flat_map(move |i| (i + 1..n).map(move |j| (i, j)))
}

impl<T: Scalar> StructuralMask<T> {
    pub fn init(node_count: usize, alphabet: usize, rng: &mut impl Rng) -> Self {
        let e = node_count * node_count.saturating_sub(1) / 2;
        Self {
            node_count,
            alphabet,
            edge_logits: Array1::from_shape_simple_fn(e, || T::of(rng.random_range(-1.0..1.0))),
            label_logits: Array2::from_shape_simple_fn((node_count, alphabet), || {
                T::of(rng.random_range(-0.5..0.5))
            }),
        }
    }

    pub fn zeros_like(&self) -> Self {
        Self {
            node_count: self.node_count,
            alphabet: self.alphabet,
            edge_logits: Array1::zeros(self.edge_logits.len()),
            label_logits: Array2::zeros(self.label_logits.raw_dim()),
        }
    }

    pub fn edge_logit(&self, i: usize, j: usize) -> T {
        let (a, b) = if i < j { (i, j) } else { (j, i) };
        self.edge_logits[pair_index(self.node_count, a, b)]
    }

    /// Bernoulli edge probabilities.
    pub fn edge_probabilities(&self) -> Array1<T> {
        self.edge_logits.mapv(sigmoid)
    }

    /// Categorical label distribution of every node.
    pub fn label_probabilities(&self) -> Array2<T> {
        let mut p = self.label_logits.clone();
        for mut row in p.rows_mut() {
            softmax_in_place(row.as_slice_mut().unwrap());
        }
        p
    }
}

impl<T: Scalar> Parameters<T> for StructuralMask<T> {
    fn visit(&self, f: &mut dyn FnMut(&[T])) {
        f(slice(&self.edge_logits));
        f(slice(&self.label_logits));
    }

    fn visit_mut(&mut self, f: &mut dyn FnMut(&mut [T])) {
        f(slice_mut(&mut self.edge_logits));
        f(slice_mut(&mut self.label_logits));
    }
}

pub(crate) fn softmax_in_place<T: Scalar>(xs: &mut [T]) {
    let max = xs.iter().copied().fold(T::neg_infinity(), T::max);
    let mut sum = T::zero();
    for x in xs.iter_mut() {
        *x = (*x - max).exp();
        sum += *x;
    }
    for x in xs.iter_mut() {
        *x /= sum;
    }
}

/// Logistic noise per edge and Gumbel noise per label slot.
///
/// Holding the noise fixed while the logits move gives common random numbers
/// across repeated evaluations.
#[derive(Debug, Clone, PartialEq)]
pub struct MaskNoise<T: Scalar> {
    pub edge: Array1<T>,
    pub label: Array2<T>,
}

fn open_unit(rng: &mut (impl Rng + ?Sized)) -> f64 {
    loop {
        let u: f64 = rng.random();
        if u > 0.0 {
            return u;
        }
    }
}

pub fn sample_noise<T: Scalar, R: Rng + ?Sized>(
    mask: &StructuralMask<T>,
    rng: &mut R,
) -> MaskNoise<T> {
    let edge = Array1::from_shape_simple_fn(mask.edge_logits.len(), || {
        let u = open_unit(rng);
        T::of(u.ln() - (-u).ln_1p())
    });
    let label = Array2::from_shape_simple_fn(mask.label_logits.raw_dim(), || {
        T::of(-(-open_unit(rng).ln()).ln())
    });
    MaskNoise { edge, label }
}

/// Binary-concrete edge weights and Gumbel-softmax label weights.
#[derive(Debug, Clone, PartialEq)]
pub struct RelaxedMask<T: Scalar> {
    /// Symmetric soft adjacency with zero diagonal.
    pub omega: Array2<T>,
    /// Soft one-hot label rows.
    pub y: Array2<T>,
}

impl<T: Scalar> RelaxedMask<T> {
    /// The discrete graph: edges whose weight exceeds 1/2, labels by argmax.
    pub fn harden(&self) -> Graph {
        let n = self.y.nrows();
        let edges: Vec<(usize, usize)> = pairs(n)
            .filter(|&(i, j)| self.omega[[i, j]] > T::of(0.5))
            .collect();
        let labels = self
            .y
            .rows()
            .into_iter()
            .map(|r| {
                let mut best = 0;
                for (k, &x) in r.iter().enumerate() {
                    if x > r[best] {
                        best = k;
                    }
                }
                best as u32
            })
            .collect();
        Graph::new(n, edges, labels).expect("mask pairs are valid edges")
    }

    /// Same sample with every weight rounded to 0 or 1.
    pub fn hardened(&self) -> Self {
        let g = self.harden();
        let n = g.node_count();
        let mut omega = Array2::zeros((n, n));
        for &(i, j) in g.edges() {
            omega[[i, j]] = T::one();
            omega[[j, i]] = T::one();
        }
        let mut y = Array2::zeros(self.y.raw_dim());
        for (i, &l) in g.node_labels().iter().enumerate() {
            y[[i, l as usize]] = T::one();
        }
        Self { omega, y }
    }
}

pub fn relax<T: Scalar>(mask: &StructuralMask<T>, noise: &MaskNoise<T>, tau: T) -> RelaxedMask<T> {
    let n = mask.node_count;
    let mut omega = Array2::zeros((n, n));
    for (k, (i, j)) in pairs(n).enumerate() {
        let w = sigmoid((mask.edge_logits[k] + noise.edge[k]) / tau);
        omega[[i, j]] = w;
        omega[[j, i]] = w;
    }
    let mut y = (&mask.label_logits + &noise.label).mapv(|x| x / tau);
    for mut row in y.rows_mut() {
        softmax_in_place(row.as_slice_mut().unwrap());
    }
    RelaxedMask { omega, y }
}

/// Pulls gradients on the relaxed weights back to the mask logits.
///
/// `d_omega` is taken entrywise; both `(i, j)` and `(j, i)` share one logit,
/// so their gradients add.
pub fn relax_backward<T: Scalar>(
    relaxed: &RelaxedMask<T>,
    d_omega: &Array2<T>,
    d_y: &Array2<T>,
    tau: T,
    grad: &mut StructuralMask<T>,
) {
    let n = relaxed.y.nrows();
    for (k, (i, j)) in pairs(n).enumerate() {
        let w = relaxed.omega[[i, j]];
        grad.edge_logits[k] += (d_omega[[i, j]] + d_omega[[j, i]]) * w * (T::one() - w) / tau;
    }
    for i in 0..n {
        let y = relaxed.y.row(i);
        let dy = d_y.row(i);
        let inner = y.dot(&dy);
        for d in 0..y.len() {
            grad.label_logits[[i, d]] += y[d] * (dy[d] - inner) / tau;
        }
    }
}

/// Draws a discrete graph from the mask along with its relaxed weights.
pub fn sample_mask<T: Scalar, R: Rng + ?Sized>(
    mask: &StructuralMask<T>,
    tau: T,
    rng: &mut R,
) -> (Graph, RelaxedMask<T>) {
    let noise = sample_noise(mask, rng);
    let relaxed = relax(mask, &noise, tau);
    (relaxed.harden(), relaxed)
}

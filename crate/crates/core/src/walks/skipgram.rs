use ndarray::{Array2, ArrayView2, Axis};
use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::corpus::WalkCorpus;
use super::pattern::PatternVocabulary;
use crate::error::{Error, Result};
use crate::rng;
use crate::scalar::{log_sigmoid, sigmoid, Scalar};

/// Pattern-indexed embedding vectors, one row per vocabulary id.
#[derive(Debug, Clone, PartialEq)]
pub struct EmbeddingTable<T: Scalar> {
    pub vectors: Array2<T>,
}

impl<T: Scalar> EmbeddingTable<T> {
    pub fn dim(&self) -> usize {
        self.vectors.ncols()
    }

    pub fn len(&self) -> usize {
        self.vectors.nrows()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.nrows() == 0
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SkipGramConfig {
    pub dim: usize,
    pub window: usize,
    pub negatives: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for SkipGramConfig {
    fn default() -> Self {
        Self {
            dim: 50,
            window: 5,
            negatives: 5,
            epochs: 5,
            lr: 0.025,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone)]
pub struct SkipGramOutput<T: Scalar> {
    pub table: EmbeddingTable<T>,
    /// Mean negative-sampling loss over the pairs of each epoch.
    pub epoch_losses: Vec<f64>,
    /// Set when the vocabulary has a single pattern, so every pair compares a
    /// vector with itself and the table carries no structural signal.
    pub degenerate: bool,
}

/// Center/context id pairs within `window` positions of each other, in
/// corpus order.
pub fn context_pairs(corpus: &WalkCorpus, window: usize) -> Vec<(u32, u32)> {
    let mut pairs = Vec::new();
    for seq in corpus.sequences.iter().flatten() {
        for i in 0..seq.len() {
            let lo = i.saturating_sub(window);
            let hi = (i + window).min(seq.len() - 1);
            for j in lo..=hi {
                if j != i {
                    pairs.push((seq[i], seq[j]));
                }
            }
        }
    }
    pairs
}

/// Loss of one center/context pair with its negatives, accumulating the
/// gradient with respect to the shared table into `grad` rows
/// `[center, context, negatives...]`.
fn pair_loss_grad<T: Scalar>(
    phi: ArrayView2<T>,
    center: usize,
    context: usize,
    negatives: &[usize],
    grad: &mut Array2<T>,
) -> T {
    let c = phi.row(center);
    let o = phi.row(context);
    let s = c.dot(&o);
    let mut loss = -log_sigmoid(s);
    let g = sigmoid(s) - T::one();
    grad.fill(T::zero());
    grad.row_mut(0).scaled_add(g, &o);
    grad.row_mut(1).scaled_add(g, &c);
    for (k, &n) in negatives.iter().enumerate() {
        let nv = phi.row(n);
        let s = c.dot(&nv);
        loss = loss - log_sigmoid(-s);
        let g = sigmoid(s);
        grad.row_mut(0).scaled_add(g, &nv);
        grad.row_mut(2 + k).scaled_add(g, &c);
    }
    loss
}

/// Negative-sampling loss `-log σ(c·o) - Σ log σ(-c·n)` of one training pair.
pub fn skipgram_pair_loss<T: Scalar>(
    phi: ArrayView2<T>,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> T {
    let mut scratch = Array2::zeros((2 + negatives.len(), phi.ncols()));
    pair_loss_grad(phi, center, context, negatives, &mut scratch)
}

/// Gradient of [`skipgram_pair_loss`] with respect to the whole table.
pub fn skipgram_pair_gradient<T: Scalar>(
    phi: ArrayView2<T>,
    center: usize,
    context: usize,
    negatives: &[usize],
) -> Array2<T> {
    let mut rows = Array2::zeros((2 + negatives.len(), phi.ncols()));
    pair_loss_grad(phi, center, context, negatives, &mut rows);
    let mut full = Array2::zeros(phi.raw_dim());
    let targets = [center, context]
        .into_iter()
        .chain(negatives.iter().copied());
    for (row, t) in rows.axis_iter(Axis(0)).zip(targets) {
        full.row_mut(t).scaled_add(T::one(), &row);
    }
    full
}

/// Trains the shared embedding table with SGD on negative sampling.
///
/// The step size decays linearly from `lr` to `lr / 10` over all updates and
/// the pair order is reshuffled every epoch.
pub fn train_skipgram<T: Scalar>(
    corpus: &WalkCorpus,
    vocab: &PatternVocabulary,
    config: &SkipGramConfig,
) -> Result<SkipGramOutput<T>> {
    if vocab.is_empty() {
        return Err(Error::Config(
            "skip-gram needs a non-empty vocabulary".into(),
        ));
    }
    if config.dim == 0 {
        return Err(Error::Config("embedding dimension must be positive".into()));
    }
    if !(config.lr > 0.0) || config.epochs == 0 {
        return Err(Error::Config(format!(
            "skip-gram needs lr > 0 and epochs > 0 (got lr = {}, epochs = {})",
            config.lr, config.epochs
        )));
    }
    let d = config.dim;
    let eta = vocab.len();
    let mut init = rng::stream(config.seed, &[0x5c1b]);
    let bound = 0.5 / d as f64;
    let mut phi =
        Array2::from_shape_simple_fn((eta, d), || T::of(init.random_range(-bound..bound)));

    let mut pairs = context_pairs(corpus, config.window);
    let total = (pairs.len() * config.epochs).max(1) as f64;
    let k = config.negatives;
    let mut negatives = vec![0usize; k];
    let mut grad = Array2::zeros((2 + k, d));
    let mut epoch_losses = Vec::with_capacity(config.epochs);
    let mut step = 0usize;

    for epoch in 0..config.epochs {
        let mut rng = rng::stream(config.seed, &[0x5c1b, 1 + epoch as u64]);
        pairs.shuffle(&mut rng);
        let mut sum = 0.0;
        for &(c, o) in &pairs {
            for n in negatives.iter_mut() {
                *n = rng.random_range(0..eta);
            }
            let lr = T::of(config.lr * (1.0 - 0.9 * step as f64 / total));
            let (c, o) = (c as usize, o as usize);
            sum += pair_loss_grad(phi.view(), c, o, &negatives, &mut grad).to_f64_lossy();
            let targets = [c, o].into_iter().chain(negatives.iter().copied());
            for (row, t) in grad.axis_iter(Axis(0)).zip(targets) {
                phi.row_mut(t).scaled_add(-lr, &row);
            }
            step += 1;
        }
        let mean = if pairs.is_empty() {
            0.0
        } else {
            sum / pairs.len() as f64
        };
        if !mean.is_finite() {
            return Err(Error::Numeric(format!(
                "skip-gram loss became {mean} in epoch {epoch}; lower the learning rate"
            )));
        }
        log::debug!("skip-gram epoch {epoch}: loss {mean:.5}");
        epoch_losses.push(mean);
    }

    let degenerate = eta == 1;
    if degenerate {
        log::warn!("walk vocabulary has a single pattern; structural embeddings are constant");
    }
    Ok(SkipGramOutput {
        table: EmbeddingTable { vectors: phi },
        epoch_losses,
        degenerate,
    })
}

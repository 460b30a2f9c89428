use serde::{Deserialize, Serialize};

use super::config::ArwSettings;
use crate::error::Result;
use crate::graph::Graph;
use crate::kernels::{
    kernel_node_embeddings, train_filters, FilterConfig, FilterModel, FilterProblem, FilterReport,
};
use crate::scalar::Scalar;
use crate::walks::{aggregate_node_embeddings, build_corpus, train_skipgram, StructuralEmbedding};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PretrainSummary {
    pub vocab_size: usize,
    pub epoch_losses: Vec<f64>,
    pub degenerate: bool,
    pub nodes: usize,
}

/// Samples anonymous walks, trains the pattern table and averages it into
/// per-node structural vectors.
pub fn pretrain_arw<T: Scalar>(
    graphs: &[Graph],
    settings: &ArwSettings,
    seed: u64,
) -> Result<(StructuralEmbedding, PretrainSummary)> {
    settings.validate()?;
    let (vocab, corpus) = build_corpus(graphs, settings.l, settings.r, seed)?;
    let out = train_skipgram::<T>(&corpus, &vocab, &settings.skipgram(seed))?;
    if out.degenerate {
        log::warn!("walk vocabulary has a single pattern; structural embeddings carry no signal");
    }
    let embedding = aggregate_node_embeddings(&corpus, &vocab, &out.table, settings.w)?;
    let summary = PretrainSummary {
        vocab_size: vocab.len(),
        epoch_losses: out.epoch_losses,
        degenerate: out.degenerate,
        nodes: corpus.node_count(),
    };
    Ok((embedding, summary))
}

/// Learns structural masks on the training graphs and returns them with
/// kernel node embeddings for every graph.
pub fn learn_filters<T: Scalar>(
    graphs: &[Graph],
    train: &[usize],
    config: &FilterConfig,
) -> Result<(FilterModel<T>, FilterReport, StructuralEmbedding)> {
    config.validate()?;
    let (problem, _) = FilterProblem::new(graphs, config.radius, config.depth)?;
    let (model, report) = train_filters::<T>(&problem, train, config)?;
    let embedding = kernel_node_embeddings(
        graphs,
        &model.masks,
        config.radius,
        config.depth,
        config.samples,
        T::of(config.tau),
        config.seed,
    )?;
    Ok((model, report, embedding))
}

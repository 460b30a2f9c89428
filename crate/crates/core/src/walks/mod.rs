//! Anonymous random walks and their skip-gram embeddings.

mod awk;
mod corpus;
mod embedding;
mod pattern;
mod skipgram;

pub(crate) use awk::for_each_walk;
pub use awk::{
    awk_dense, awk_feature_map, awk_inner, awk_rooted_feature, AwkFeature, AWK_ENUMERATION_LIMIT,
};
pub use corpus::{build_corpus, WalkCorpus};
pub use embedding::{
    aggregate_node_embeddings, EmbeddingMeta, EmbeddingMethod, KernelEmbeddingMeta,
    StructuralEmbedding, EMBEDDING_FORMAT_VERSION,
};
pub use pattern::{
    anonymize, build_vocabulary, enumerate_patterns, AnonymousWalkPattern, PatternVocabulary,
};
pub use skipgram::{
    context_pairs, skipgram_pair_gradient, skipgram_pair_loss, train_skipgram, EmbeddingTable,
    SkipGramConfig, SkipGramOutput,
};

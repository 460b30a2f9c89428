//! Structural embeddings and attention networks for graph-level learning.

pub mod artifact;
mod error;
pub mod graph;
pub mod gsat;
pub mod kernels;
pub mod nn;
pub mod rng;
pub mod scalar;
pub mod train;
pub mod walks;

pub use error::{Error, Result};
pub use graph::{Graph, Subgraph, Target, Walk};
pub use scalar::Scalar;

pub type GsatModelF32 = gsat::GsatModel<f32>;
pub type GsatModelF64 = gsat::GsatModel<f64>;
pub type EmbeddingTableF32 = walks::EmbeddingTable<f32>;
pub type EmbeddingTableF64 = walks::EmbeddingTable<f64>;
pub type FilterModelF32 = kernels::FilterModel<f32>;
pub type FilterModelF64 = kernels::FilterModel<f64>;
pub type StructuralMaskF64 = kernels::StructuralMask<f64>;

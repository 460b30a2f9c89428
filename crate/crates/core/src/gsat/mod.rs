//! Structure-gated attention layers, pooling and the graph-level model.

mod checkpoint;
mod layer;
mod model;
mod pool;

pub use checkpoint::{GsatCheckpoint, MODEL_FORMAT_VERSION};
pub use layer::{
    attention_coefficients, gat_baseline_forward, gsat_layer_backward, gsat_layer_forward,
    AttentionActivation, AttentionMatrix, GsatLayerParams, HeadParams, LayerCache, LayerOptions,
};
pub use model::{
    cross_entropy, mean_squared_error, softmax, Forward, GraphInput, GsatConfig, GsatModel,
    Pooling, Task, CE_EPS,
};
pub use pool::{
    cluster_mean, edge_pool_backward, edge_pool_stage, global_mean_pool, EdgePoolParams, PoolStage,
};

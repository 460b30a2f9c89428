//! Training loops, multi-seed experiments, sweeps and metrics.

mod config;
mod metrics;
mod pipeline;
mod report;
mod runner;
mod sweep;

pub use config::{ArwSettings, ExperimentConfig, OptimizerSettings};
pub use metrics::{accuracy, argmax, mae, mae_per_dim, mean_std};
pub use pipeline::{learn_filters, pretrain_arw, PretrainSummary};
pub use report::{EmbeddingSummary, Metric, RunReport, SeedReport};
pub use runner::{
    evaluate, infer_task, label_alphabet, run_experiment, train_classification, train_regression,
    train_seed, PreparedData,
};
pub use sweep::{sensitivity_sweep, walk_length_ablation, SweepAxis, SweepRow, SweepTable};

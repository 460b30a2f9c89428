//! Weisfeiler-Lehman kernels and learnable stochastic structural masks.

mod awk_layer;
mod checkpoint;
mod filters;
mod jsd;
mod mask;
mod relaxed;
mod response;
mod wl;

pub use awk_layer::gknn_awk_layer;
pub use checkpoint::{MaskCheckpoint, MASK_FORMAT_VERSION};
pub use filters::{
    draw_noise, filter_loss_grad, relaxed_responses, train_filters, FilterConfig, FilterLoss,
    FilterModel, FilterProblem, FilterReport,
};
pub use jsd::{jsd_loss, jsd_loss_grad, JSD_EPS};
pub use mask::{
    relax, relax_backward, sample_mask, sample_noise, MaskNoise, RelaxedMask, StructuralMask,
};
pub use relaxed::{RelaxedForward, RelaxedWlPlan};
pub use response::{
    expected_kernel_response, hard_mask_histograms, kernel_node_embeddings,
    neighborhood_histograms, responses, responses_backward, NeighborhoodIndex,
};
pub use wl::{
    frozen_histogram, histogram_dot, wl_kernel, wl_kernel_features, wl_refine, wl_refine_frozen,
    WlDictionary, WlFeature, WlLabel,
};

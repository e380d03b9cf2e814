//! Learned stand-in for the exact solver.
//!
//! The assignment is encoded as one subchannel label per user and regressed
//! directly from normalised effective gains by small tanh networks. Several
//! base networks are stacked under a top network trained on their outputs
//! for held-out validation data, and the final real-valued output is turned
//! into a feasible assignment by ranking.

mod decode;
mod ensemble;
pub mod io;
mod labels;
mod mlp;
mod train;

pub use decode::{accuracy, permutation_decode};
pub use ensemble::{
    default_base_specs, label_mean, regression_targets, stack_train, train_bases, AccuracyReport, EnsembleModel,
    NetSpec, TrainedNet, DEFAULT_BASE_HIDDEN, DEFAULT_TOP_HIDDEN,
};
pub use labels::{decode_labels, encode_labels, encode_matrix, LabelVector};
pub use mlp::{mlp_forward, mlp_gradient, mse_loss, MlpModel};
pub use train::{train, OptimizerKind, TrainConfig, TrainOutcome};

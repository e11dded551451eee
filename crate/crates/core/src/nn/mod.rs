//! Deterministic dense-network training engine with layer freezing.
//!
//! Parameterized layers are counted one per dense layer; the activation
//! belongs to the dense layer it follows. All arithmetic is `f64`.

mod arch;
pub mod checkpoint;
mod model;
mod schedule;
mod train;

pub use arch::{Activation, ArchSpec, LayerSpec};
pub use model::{
    argmax, cross_entropy, init_model, predict_labels, predict_probs, reinit_suffix, softmax_rows,
    Dense, Model,
};
pub use schedule::{lr_at, TrainingConfig};
pub use train::{
    error_rate, loss_and_grads, precompute_prefix_features, train, train_with_cached_prefix, Batch,
    LayerGrad,
};

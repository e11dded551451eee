//! Datasets, loaders, and deletion-test construction.

mod dataset;
pub mod idx;
mod plan;
mod view;

pub use dataset::{split_sizes, synth_gaussians, LabeledDataset, Split};
pub use idx::load_idx;
pub use plan::{
    dt_for, hardest_pair, make_deletion_plan, ClassParams, DeletionPlan, TestKind, TestSpec,
};
pub use view::{AccessAudit, DataView, FeatureSet, Samples};

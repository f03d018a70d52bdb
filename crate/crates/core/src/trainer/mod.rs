//! Offline training: table estimation from annotated traces, the
//! (type, policy) training sweep that fits the selection priors, and
//! library pruning.

mod estimate;
mod prune;
mod train;

pub use estimate::*;
pub use prune::{prune_library, TV_CLUSTER_THRESHOLD};
pub use train::{
    calibrate_base_model, train_models, write_training_summary, TrainingOutput, TrainingPlan, TrainingSummaryRow,
    MIN_ROW_SAMPLES,
};

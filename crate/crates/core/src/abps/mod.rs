//! Bayesian policy selection: a library of perturbed decision models,
//! per-(type, policy) observation and performance priors, the type-belief
//! update after each task, and expected-improvement selection.

mod library;
mod models;
mod select;

pub use library::{generate_library, PolicyEntry, PolicyId, PolicyLibrary};
pub use models::{Histogram, ObservationModel, PerformanceModel, TrainedModels, DEFAULT_BINS};
pub use select::{
    select_policy_ei, select_policy_pi, task_regret, u_beta, update_type_belief, RegretRecord, TypeBelief,
};

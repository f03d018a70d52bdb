//! Anticipatory human-robot collaboration on a simulated conveyor-belt
//! sorting task.
//!
//! - [`apomdp`]: the robot's two-stage POMDP decision model and the reactive baseline
//! - [`solver`]: online lookahead planning over beliefs
//! - [`human`]: simulated human collaborators as type-dependent Markov models
//! - [`env`]: the tick-based task environment, decision triggers and episode runner
//! - [`abps`]: Bayesian policy selection over a policy library
//! - [`trainer`]: offline estimation of model tables and selection priors
//! - [`metrics`]: per-task collaboration metrics
//! - [`experiment`]: end-to-end experiment drivers behind the CLI

pub mod abps;
pub mod apomdp;
pub mod env;
pub mod error;
pub mod experiment;
pub mod human;
pub mod metrics;
pub mod seed;
pub mod solver;
pub mod trainer;

pub use abps::{
    select_policy_ei, select_policy_pi, task_regret, u_beta, update_type_belief, ObservationModel, PerformanceModel,
    PolicyId, PolicyLibrary, RegretRecord, TypeBelief,
};
pub use apomdp::{
    belief_update, build_base_model, make_reactive_policy, perturb_model, ApomdpModel, Belief, Flag,
    ObservationVector, ReactivePolicy, RewardSpec, RobotAction, RobotState,
};
pub use error::{Error, Result};
pub use human::{
    build_human_model, make_type_space, step_human, trace_likelihood, HumanAction, HumanModel, HumanState, HumanType,
    InteractionCounters,
};
pub use solver::{exact_plan, plan_action, SolverConfig};

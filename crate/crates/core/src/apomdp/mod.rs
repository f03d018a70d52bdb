//! The robot's anticipatory decision model.
//!
//! A two-stage POMDP: from `HumanNotStruggling` the model may drift into
//! stage-1 states that anticipate *why* the human could struggle (tired,
//! distracted, not capable), and from there into stage-2 states that decide
//! whether help is actually needed. Observations are the 9-flag vectors
//! produced by the environment; their likelihood is modelled as a product of
//! independent per-flag Bernoulli terms.

mod base;
mod belief;
mod model;
mod perturb;
mod reactive;

pub use base::{build_base_model, RewardSpec};
pub use belief::{belief_update, Belief};
pub use model::ApomdpModel;
pub use perturb::perturb_model;
pub use reactive::{make_reactive_policy, ReactivePolicy};

use serde::{Deserialize, Serialize};
use std::fmt;

/// Discount used by the base model and for scoring returns.
pub const DEFAULT_GAMMA: f64 = 0.95;
pub const NUM_FLAGS: usize = 9;
pub const NUM_ACTIONS: usize = 5;
pub const NUM_ROBOT_STATES: usize = 11;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotState {
    TaskAssignedToHuman,
    TaskAssignedToRobot,
    HumanNotStruggling,
    MayBeTired,
    MayHaveLostAttention,
    MayNotBeCapable,
    NeedsAssistance,
    NoAssistanceNeeded,
    WarningReceived,
    GlobalSuccess,
    GlobalFail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum StateKind {
    Initial,
    Stage1,
    Stage2,
    Tracking,
    Warning,
    Terminal,
}

impl RobotState {
    pub const ALL: [RobotState; NUM_ROBOT_STATES] = [
        RobotState::TaskAssignedToHuman,
        RobotState::TaskAssignedToRobot,
        RobotState::HumanNotStruggling,
        RobotState::MayBeTired,
        RobotState::MayHaveLostAttention,
        RobotState::MayNotBeCapable,
        RobotState::NeedsAssistance,
        RobotState::NoAssistanceNeeded,
        RobotState::WarningReceived,
        RobotState::GlobalSuccess,
        RobotState::GlobalFail,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }

    pub fn kind(self) -> StateKind {
        use RobotState::*;
        match self {
            TaskAssignedToHuman | TaskAssignedToRobot => StateKind::Initial,
            HumanNotStruggling => StateKind::Tracking,
            MayBeTired | MayHaveLostAttention | MayNotBeCapable => StateKind::Stage1,
            NeedsAssistance | NoAssistanceNeeded => StateKind::Stage2,
            WarningReceived => StateKind::Warning,
            GlobalSuccess | GlobalFail => StateKind::Terminal,
        }
    }

    pub fn is_terminal(self) -> bool {
        self.kind() == StateKind::Terminal
    }

    pub fn name(self) -> &'static str {
        use RobotState::*;
        match self {
            TaskAssignedToHuman => "TaskAssignedToHuman",
            TaskAssignedToRobot => "TaskAssignedToRobot",
            HumanNotStruggling => "HumanNotStruggling",
            MayBeTired => "MayBeTired",
            MayHaveLostAttention => "MayHaveLostAttention",
            MayNotBeCapable => "MayNotBeCapable",
            NeedsAssistance => "NeedsAssistance",
            NoAssistanceNeeded => "NoAssistanceNeeded",
            WarningReceived => "WarningReceived",
            GlobalSuccess => "GlobalSuccess",
            GlobalFail => "GlobalFail",
        }
    }
}

impl fmt::Display for RobotState {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

/// Robot actions, in tie-breaking order.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum RobotAction {
    Idle,
    Plan,
    TakeOver,
    PointToRemind,
    Cancel,
}

impl RobotAction {
    pub const ALL: [RobotAction; NUM_ACTIONS] = [
        RobotAction::Idle,
        RobotAction::Plan,
        RobotAction::TakeOver,
        RobotAction::PointToRemind,
        RobotAction::Cancel,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn from_index(i: usize) -> Option<Self> {
        Self::ALL.get(i).copied()
    }
}

impl fmt::Display for RobotAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        fmt::Debug::fmt(self, f)
    }
}

/// Index of each observation flag inside an [`ObservationVector`].
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Flag {
    HumanDetected,
    LookingAround,
    AttemptGrasp,
    WarnsRobot,
    Idle,
    TaskSuccess,
    TaskFail,
    SubtaskSuccess,
    SubtaskFail,
}

impl Flag {
    pub const ALL: [Flag; NUM_FLAGS] = [
        Flag::HumanDetected,
        Flag::LookingAround,
        Flag::AttemptGrasp,
        Flag::WarnsRobot,
        Flag::Idle,
        Flag::TaskSuccess,
        Flag::TaskFail,
        Flag::SubtaskSuccess,
        Flag::SubtaskFail,
    ];

    pub fn index(self) -> usize {
        self as usize
    }
}

/// The 9 boolean observables σ1..σ9, stored in flag order.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(transparent)]
pub struct ObservationVector([bool; NUM_FLAGS]);

impl ObservationVector {
    pub fn new(flags: [bool; NUM_FLAGS]) -> Self {
        Self(flags)
    }

    pub fn from_flags(set: &[Flag]) -> Self {
        let mut v = Self::default();
        for &f in set {
            v.set(f, true);
        }
        v
    }

    pub fn get(&self, f: Flag) -> bool {
        self.0[f.index()]
    }

    pub fn set(&mut self, f: Flag, value: bool) {
        self.0[f.index()] = value;
    }

    pub fn flags(&self) -> &[bool; NUM_FLAGS] {
        &self.0
    }

    pub fn bits(&self) -> u16 {
        self.0
            .iter()
            .enumerate()
            .fold(0, |acc, (i, &b)| acc | (u16::from(b) << i))
    }

    pub fn from_bits(bits: u16) -> Self {
        let mut flags = [false; NUM_FLAGS];
        for (i, f) in flags.iter_mut().enumerate() {
            *f = bits & (1 << i) != 0;
        }
        Self(flags)
    }

    /// Mutual-exclusion rules of the sensing pipeline: one recognised human
    /// gesture per tick, and at most one outcome flag per outcome pair.
    pub fn is_valid(&self) -> bool {
        use Flag::*;
        let count = |fs: &[Flag]| fs.iter().filter(|&&f| self.get(f)).count();
        count(&[TaskSuccess, TaskFail]) <= 1
            && count(&[SubtaskSuccess, SubtaskFail]) <= 1
            && count(&[AttemptGrasp, WarnsRobot, Idle]) <= 1
    }
}

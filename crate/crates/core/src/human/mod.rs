//! Simulated human collaborators.
//!
//! A human is a Markov chain over states of mind whose transition row
//! depends on what the robot is doing (the context) and on two interaction
//! counters: how often the robot has interfered and how many tasks have been
//! handled. Each state emits one action. Long-term characteristics (the
//! [`HumanType`]) bias the rows and the counter responses.

mod likelihood;
mod model;

pub use likelihood::{generate_trace, task_likelihood, trace_likelihood};
pub use model::{build_human_model, step_human, HumanModel, Modifiers};

use serde::{Deserialize, Serialize};
use std::fmt;

use crate::apomdp::RobotAction;

pub const NUM_HUMAN_STATES: usize = 9;
pub const NUM_HUMAN_ACTIONS: usize = 5;
pub const NUM_TYPES: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Level {
    Low,
    High,
}

impl Level {
    fn from_bit(bit: bool) -> Self {
        if bit {
            Level::High
        } else {
            Level::Low
        }
    }

    pub fn is_low(self) -> bool {
        self == Level::Low
    }
}

/// Long-term characteristics of a human collaborator.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct HumanType {
    pub expertise: Level,
    pub stamina: Level,
    pub attention: Level,
    pub collaborativeness: Level,
}

impl HumanType {
    /// Position in [`make_type_space`]: expertise is the most significant
    /// bit, collaborativeness the least; `High` is 1.
    pub fn index(&self) -> usize {
        let bit = |l: Level| usize::from(l == Level::High);
        bit(self.expertise) << 3 | bit(self.stamina) << 2 | bit(self.attention) << 1 | bit(self.collaborativeness)
    }

    pub fn from_index(i: usize) -> Option<Self> {
        (i < NUM_TYPES).then(|| Self {
            expertise: Level::from_bit(i & 8 != 0),
            stamina: Level::from_bit(i & 4 != 0),
            attention: Level::from_bit(i & 2 != 0),
            collaborativeness: Level::from_bit(i & 1 != 0),
        })
    }
}

impl fmt::Display for HumanType {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let c = |l: Level| if l == Level::High { 'H' } else { 'L' };
        write!(
            f,
            "E{}S{}A{}C{}",
            c(self.expertise),
            c(self.stamina),
            c(self.attention),
            c(self.collaborativeness)
        )
    }
}

/// All 16 combinations of Low/High characteristics, in index order.
pub fn make_type_space() -> Vec<HumanType> {
    (0..NUM_TYPES).filter_map(HumanType::from_index).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HumanState {
    Attending,
    Evaluating,
    Working,
    NoAttention,
    Tired,
    LostMotivation,
    WarnTheRobot,
    GlobalSuccess,
    GlobalFail,
}

impl HumanState {
    pub const ALL: [HumanState; NUM_HUMAN_STATES] = [
        HumanState::Attending,
        HumanState::Evaluating,
        HumanState::Working,
        HumanState::NoAttention,
        HumanState::Tired,
        HumanState::LostMotivation,
        HumanState::WarnTheRobot,
        HumanState::GlobalSuccess,
        HumanState::GlobalFail,
    ];

    pub fn index(self) -> usize {
        self as usize
    }

    pub fn is_terminal(self) -> bool {
        matches!(self, HumanState::GlobalSuccess | HumanState::GlobalFail)
    }

    /// The action a human in this state performs.
    pub fn action(self) -> HumanAction {
        match self {
            HumanState::Working => HumanAction::GraspAndPlace,
            HumanState::NoAttention => HumanAction::LookAround,
            HumanState::WarnTheRobot => HumanAction::Warn,
            HumanState::LostMotivation => HumanAction::Leave,
            HumanState::Attending
            | HumanState::Evaluating
            | HumanState::Tired
            | HumanState::GlobalSuccess
            | HumanState::GlobalFail => HumanAction::Idle,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum HumanAction {
    GraspAndPlace,
    Idle,
    LookAround,
    Warn,
    Leave,
}

impl HumanAction {
    pub const ALL: [HumanAction; NUM_HUMAN_ACTIONS] = [
        HumanAction::GraspAndPlace,
        HumanAction::Idle,
        HumanAction::LookAround,
        HumanAction::Warn,
        HumanAction::Leave,
    ];
}

/// What the robot is doing, as far as the human's dynamics are concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum RobotContext {
    Passive,
    Remind,
    Interfere,
}

impl RobotContext {
    pub const ALL: [RobotContext; 3] = [RobotContext::Passive, RobotContext::Remind, RobotContext::Interfere];

    pub fn index(self) -> usize {
        self as usize
    }
}

impl From<RobotAction> for RobotContext {
    fn from(a: RobotAction) -> Self {
        match a {
            RobotAction::TakeOver => RobotContext::Interfere,
            RobotAction::PointToRemind => RobotContext::Remind,
            RobotAction::Idle | RobotAction::Plan | RobotAction::Cancel => RobotContext::Passive,
        }
    }
}

/// Robot interferences so far (`n_r`) and tasks handled so far (`k_t`).
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct InteractionCounters {
    pub interferences: u32,
    pub tasks: u32,
}

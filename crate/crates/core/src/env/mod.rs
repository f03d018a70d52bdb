//! The conveyor-belt sorting task.
//!
//! Cubes arrive one at a time. The human is the assignee and sorts them by
//! grasping and placing; the robot may take a cube over. A cube left on the
//! belt for too long falls into the uninspected container and counts as a
//! failure. One tick is one simulated second.

mod runner;

pub use runner::{effective_action, run_episode, Controller, EpisodeLog, EpisodeSettings, EpisodeSummary, Participant, TickRecord};

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;

use crate::apomdp::{Flag, ObservationVector, RewardSpec, RobotAction};
use crate::error::{config, Error, Result};
use crate::human::{HumanAction, HumanType, Level};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum CubeColor {
    Red,
    Green,
    Blue,
    Yellow,
}

impl CubeColor {
    pub const ALL: [CubeColor; 4] = [CubeColor::Red, CubeColor::Green, CubeColor::Blue, CubeColor::Yellow];
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Container {
    Left,
    Middle,
    Right,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Actor {
    Human,
    Robot,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum SubtaskOutcome {
    Success,
    Fail,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum TriggerEvent {
    ContainerUpdate,
    HumanActionChange,
    Timeout,
    WarningInterrupt,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Trigger {
    TriggerNow,
    Queue,
    Skip,
}

/// A resolved subtask.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Placement {
    pub actor: Actor,
    pub outcome: SubtaskOutcome,
}

fn default_subtasks() -> u32 {
    10
}
fn default_belt_timeout() -> u32 {
    12
}
fn default_grasp() -> u32 {
    4
}
fn default_warning() -> u32 {
    3
}
fn default_motion() -> u32 {
    4
}
fn default_planned_motion() -> u32 {
    2
}
fn default_gap() -> u32 {
    2
}
fn default_robot_success() -> f64 {
    0.95
}

fn default_rules() -> BTreeMap<CubeColor, Container> {
    BTreeMap::from([
        (CubeColor::Red, Container::Left),
        (CubeColor::Green, Container::Middle),
        (CubeColor::Blue, Container::Right),
        (CubeColor::Yellow, Container::Middle),
    ])
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskConfig {
    pub task_type: u8,
    #[serde(default = "default_subtasks")]
    pub num_subtasks: u32,
    #[serde(default = "default_belt_timeout")]
    pub belt_timeout_ticks: u32,
    #[serde(default = "default_rules")]
    pub rule_table: BTreeMap<CubeColor, Container>,
    #[serde(default)]
    pub stroop: bool,
    #[serde(default)]
    pub display_only: Option<String>,
    #[serde(default = "default_grasp")]
    pub grasp_ticks: u32,
    #[serde(default = "default_warning")]
    pub warning_ticks: u32,
    #[serde(default = "default_motion")]
    pub robot_motion_ticks: u32,
    #[serde(default = "default_planned_motion")]
    pub planned_motion_ticks: u32,
    #[serde(default = "default_gap")]
    pub cube_gap_ticks: u32,
    #[serde(default = "default_robot_success")]
    pub robot_success_rate: f64,
}

impl TaskConfig {
    pub fn of_type(task_type: u8) -> Self {
        Self {
            task_type,
            num_subtasks: default_subtasks(),
            belt_timeout_ticks: default_belt_timeout(),
            rule_table: default_rules(),
            stroop: task_type >= 4,
            display_only: None,
            grasp_ticks: default_grasp(),
            warning_ticks: default_warning(),
            robot_motion_ticks: default_motion(),
            planned_motion_ticks: default_planned_motion(),
            cube_gap_ticks: default_gap(),
            robot_success_rate: default_robot_success(),
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(1..=5).contains(&self.task_type) {
            return Err(config("task type must be in 1..=5"));
        }
        if self.num_subtasks == 0 {
            return Err(config("a task needs at least one subtask"));
        }
        if CubeColor::ALL.iter().any(|c| !self.rule_table.contains_key(c)) {
            return Err(config("rule table must map every cube color"));
        }
        if self.belt_timeout_ticks == 0 || self.grasp_ticks == 0 || self.robot_motion_ticks == 0 {
            return Err(config("durations must be at least one tick"));
        }
        if self.planned_motion_ticks == 0 || self.planned_motion_ticks > self.robot_motion_ticks {
            return Err(config("planned motion must take between 1 tick and the unplanned duration"));
        }
        if !(0.0..=1.0).contains(&self.robot_success_rate) {
            return Err(config("robot success rate must be a probability"));
        }
        Ok(())
    }

    /// Upper bound on episode length for any pair of behaviors.
    pub fn max_ticks(&self) -> u32 {
        let per_cube = self.cube_gap_ticks + self.belt_timeout_ticks + self.grasp_ticks.max(self.robot_motion_ticks) + 1;
        // A robot that keeps cancelling can hold a cube for a motion's length
        // per belt tick; bound that too.
        self.num_subtasks * per_cube * (self.robot_motion_ticks + 1) + 1
    }
}

impl Default for TaskConfig {
    fn default() -> Self {
        Self::of_type(1)
    }
}

/// Base success probability of a human placement, by task type and
/// expertise: (High, Low).
fn base_placement(task_type: u8) -> (f64, f64) {
    match task_type {
        1 => (0.90, 0.75),
        2 => (0.80, 0.60),
        3 => (0.60, 0.40),
        4 => (0.55, 0.35),
        _ => (0.50, 0.30),
    }
}

const LEARNING_GAIN_TYPE5: f64 = 0.35;
const LEARNING_SCALE: f64 = 40.0;

/// Success probability of a human placement after `cumulative_subtasks`
/// prior subtasks of practice.
pub fn placement_probability(t: &HumanType, cumulative_subtasks: u32, task_type: u8) -> f64 {
    let (high, low) = base_placement(task_type);
    let base = if t.expertise == Level::High { high } else { low };
    let gain = if task_type == 5 { LEARNING_GAIN_TYPE5 } else { 0.0 };
    let learned = gain * (1.0 - (-f64::from(cumulative_subtasks) / LEARNING_SCALE).exp());
    (base + learned).clamp(0.05, 0.99)
}

pub fn human_placement_outcome<R: Rng>(t: &HumanType, cumulative_subtasks: u32, cfg: &TaskConfig, rng: &mut R) -> bool {
    rng.gen_bool(placement_probability(t, cumulative_subtasks, cfg.task_type))
}

/// Decides whether the robot should decide now.
pub fn decision_trigger(
    prev_action: HumanAction,
    cur_action: HumanAction,
    events: &[TriggerEvent],
    ticks_since_decision: u32,
    in_flight: bool,
) -> Trigger {
    let interrupt = events
        .iter()
        .any(|e| matches!(e, TriggerEvent::ContainerUpdate | TriggerEvent::WarningInterrupt));
    if interrupt {
        return Trigger::TriggerNow;
    }
    if cur_action != prev_action || ticks_since_decision >= 3 {
        return if in_flight { Trigger::Queue } else { Trigger::TriggerNow };
    }
    Trigger::Skip
}

pub fn score(outcome: SubtaskOutcome, actor: Actor, spec: &RewardSpec) -> f64 {
    match (outcome, actor) {
        (SubtaskOutcome::Success, Actor::Human) => spec.subtask_success_by_assignee,
        (SubtaskOutcome::Success, Actor::Robot) => spec.subtask_success_by_other,
        (SubtaskOutcome::Fail, _) => spec.subtask_fail,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Holder {
    Belt,
    /// Ticks left until the placement resolves.
    Human(u32),
    Robot(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Cube {
    pub color: CubeColor,
    pub age: u32,
    pub holder: Holder,
}

/// What one tick produced.
#[derive(Debug, Clone, PartialEq)]
pub struct TickResult {
    pub events: Vec<TriggerEvent>,
    pub sigma: ObservationVector,
    pub reward: f64,
    pub placement: Option<Placement>,
    /// The robot started taking a cube while the human was present.
    pub interfered: bool,
    /// A human grasp was cut short by the robot.
    pub grasp_interrupted: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EnvState {
    cfg: TaskConfig,
    rewards: RewardSpec,
    human_type: HumanType,
    prior_subtasks: u32,
    cubes: Vec<CubeColor>,
    pub tick: u32,
    pub cube: Option<Cube>,
    next_cube_in: u32,
    pub subtasks_done: u32,
    pub n_s: u32,
    pub n_f: u32,
    pub n_s_human: u32,
    pub n_f_human: u32,
    pub n_s_robot: u32,
    pub n_f_robot: u32,
    pub assignee: Actor,
    pub robot_planned: bool,
    pub last_human_action: HumanAction,
    pub warnings: u32,
}

/// A fresh task. Cube colors are drawn from `seed`.
pub fn new_task(cfg: &TaskConfig, seed: u64) -> Result<EnvState> {
    cfg.validate()?;
    let mut rng = seed::rng(seed, &[0x6375_6265]);
    let cubes = (0..cfg.num_subtasks)
        .map(|_| *CubeColor::ALL.choose(&mut rng).expect("non-empty"))
        .collect();
    Ok(EnvState {
        cfg: cfg.clone(),
        rewards: RewardSpec::default(),
        human_type: HumanType::from_index(15).expect("valid index"),
        prior_subtasks: 0,
        cubes,
        tick: 0,
        cube: None,
        next_cube_in: 1,
        subtasks_done: 0,
        n_s: 0,
        n_f: 0,
        n_s_human: 0,
        n_f_human: 0,
        n_s_robot: 0,
        n_f_robot: 0,
        assignee: Actor::Human,
        robot_planned: false,
        last_human_action: HumanAction::Idle,
        warnings: 0,
    })
}

impl EnvState {
    /// Sets who is doing the task and how much practice they already have.
    pub fn with_human(mut self, t: HumanType, prior_subtasks: u32) -> Self {
        self.human_type = t;
        self.prior_subtasks = prior_subtasks;
        self
    }

    pub fn with_rewards(mut self, spec: RewardSpec) -> Self {
        self.rewards = spec;
        self
    }

    pub fn config(&self) -> &TaskConfig {
        &self.cfg
    }

    pub fn cube_sequence(&self) -> &[CubeColor] {
        &self.cubes
    }

    pub fn is_terminal(&self) -> bool {
        self.subtasks_done >= self.cfg.num_subtasks
    }

    pub fn task_success(&self) -> bool {
        self.n_s > self.n_f
    }

    pub fn human_grasping(&self) -> bool {
        matches!(self.cube, Some(Cube { holder: Holder::Human(_), .. }))
    }

    pub fn robot_moving(&self) -> bool {
        matches!(self.cube, Some(Cube { holder: Holder::Robot(_), .. }))
    }

    pub fn cube_on_belt(&self) -> bool {
        matches!(self.cube, Some(Cube { holder: Holder::Belt, .. }))
    }

    fn resolve(&mut self, actor: Actor, outcome: SubtaskOutcome, sigma: &mut ObservationVector) -> Placement {
        let success = outcome == SubtaskOutcome::Success;
        match (actor, success) {
            (Actor::Human, true) => self.n_s_human += 1,
            (Actor::Human, false) => self.n_f_human += 1,
            (Actor::Robot, true) => self.n_s_robot += 1,
            (Actor::Robot, false) => self.n_f_robot += 1,
        }
        if success {
            self.n_s += 1;
            sigma.set(Flag::SubtaskSuccess, true);
        } else {
            self.n_f += 1;
            sigma.set(Flag::SubtaskFail, true);
        }
        self.subtasks_done += 1;
        self.cube = None;
        self.next_cube_in = self.cfg.cube_gap_ticks.max(1);
        self.robot_planned = false;
        Placement { actor, outcome }
    }

    /// Advances the task by one tick.
    pub fn tick<R: Rng>(&mut self, human_action: HumanAction, robot_action: RobotAction, rng: &mut R) -> Result<TickResult> {
        if self.is_terminal() {
            return Err(Error::Contract("tick on a finished task".into()));
        }
        self.tick += 1;
        let mut sigma = ObservationVector::default();
        let mut events = Vec::new();
        let mut reward = 0.0;
        let mut placement = None;
        let mut interfered = false;
        let mut grasp_interrupted = false;
        let human_present = human_action != HumanAction::Leave;

        if self.cube.is_none() {
            self.next_cube_in = self.next_cube_in.saturating_sub(1);
            if self.next_cube_in == 0 {
                let color = self.cubes[self.subtasks_done as usize];
                self.cube = Some(Cube { color, age: 0, holder: Holder::Belt });
            }
        }

        match robot_action {
            RobotAction::Cancel => {
                if let Some(c) = self.cube.as_mut() {
                    if matches!(c.holder, Holder::Robot(_)) {
                        c.holder = Holder::Belt;
                    }
                }
                self.robot_planned = false;
            }
            RobotAction::TakeOver => {
                if let Some(c) = self.cube.as_mut() {
                    let motion = if self.robot_planned { self.cfg.planned_motion_ticks } else { self.cfg.robot_motion_ticks };
                    match c.holder {
                        Holder::Belt => {
                            c.holder = Holder::Robot(motion);
                            interfered = human_present;
                        }
                        Holder::Human(_) => {
                            c.holder = Holder::Robot(motion);
                            interfered = true;
                            grasp_interrupted = true;
                        }
                        Holder::Robot(_) => {}
                    }
                }
            }
            RobotAction::Plan => self.robot_planned = true,
            RobotAction::Idle | RobotAction::PointToRemind => {}
        }

        if let Some(c) = self.cube.as_mut() {
            match (c.holder, human_action) {
                (Holder::Belt, HumanAction::GraspAndPlace) => c.holder = Holder::Human(self.cfg.grasp_ticks),
                (Holder::Human(_), a) if a != HumanAction::GraspAndPlace => c.holder = Holder::Belt,
                _ => {}
            }
        }

        if let Some(c) = self.cube.as_mut() {
            c.age += 1;
            match c.holder {
                Holder::Human(left) if left <= 1 => {
                    let cumulative = self.prior_subtasks + self.subtasks_done;
                    let ok = human_placement_outcome(&self.human_type, cumulative, &self.cfg, rng);
                    let outcome = if ok { SubtaskOutcome::Success } else { SubtaskOutcome::Fail };
                    placement = Some(self.resolve(Actor::Human, outcome, &mut sigma));
                }
                Holder::Robot(left) if left <= 1 => {
                    let ok = rng.gen_bool(self.cfg.robot_success_rate);
                    let outcome = if ok { SubtaskOutcome::Success } else { SubtaskOutcome::Fail };
                    placement = Some(self.resolve(Actor::Robot, outcome, &mut sigma));
                }
                Holder::Human(left) => c.holder = Holder::Human(left - 1),
                Holder::Robot(left) => c.holder = Holder::Robot(left - 1),
                Holder::Belt if c.age >= self.cfg.belt_timeout_ticks => {
                    // The cube falls off the belt; the assignee owns the loss.
                    placement = Some(self.resolve(self.assignee, SubtaskOutcome::Fail, &mut sigma));
                }
                Holder::Belt => {}
            }
        }
        if let Some(p) = placement {
            reward += score(p.outcome, p.actor, &self.rewards);
            events.push(TriggerEvent::ContainerUpdate);
        }

        sigma.set(Flag::HumanDetected, human_present);
        sigma.set(Flag::LookingAround, human_action == HumanAction::LookAround);
        sigma.set(Flag::AttemptGrasp, human_action == HumanAction::GraspAndPlace);
        sigma.set(Flag::WarnsRobot, human_action == HumanAction::Warn);
        sigma.set(Flag::Idle, human_action == HumanAction::Idle);
        if human_action == HumanAction::Warn {
            events.push(TriggerEvent::WarningInterrupt);
            if self.last_human_action != HumanAction::Warn {
                self.warnings += 1;
                reward += self.rewards.warning_penalty;
            }
        }
        if human_action != self.last_human_action {
            events.push(TriggerEvent::HumanActionChange);
        }
        self.last_human_action = human_action;

        if self.is_terminal() {
            let success = self.task_success();
            sigma.set(Flag::TaskSuccess, success);
            sigma.set(Flag::TaskFail, !success);
        }
        Ok(TickResult { events, sigma, reward, placement, interfered, grasp_interrupted })
    }
}

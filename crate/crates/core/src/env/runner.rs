use serde::{Deserialize, Serialize};
use std::io::{BufRead, Write};

use super::{decision_trigger, new_task, EnvState, Placement, TaskConfig, TickResult, Trigger, TriggerEvent};
use crate::apomdp::{belief_update, DEFAULT_GAMMA, ApomdpModel, Belief, ObservationVector, ReactivePolicy, RewardSpec, RobotAction, RobotState};
use crate::error::{Error, Result};
use crate::human::{step_human, HumanAction, HumanModel, HumanState, HumanType, InteractionCounters};
use crate::seed;
use crate::solver::{plan_action, SolverConfig};

/// The robot's decision maker for one episode.
#[derive(Debug, Clone)]
pub enum Controller {
    Proactive { model: ApomdpModel, solver: SolverConfig, belief: Belief },
    Reactive(ReactivePolicy),
    /// Never helps; used for the human-alone condition.
    Idle,
    /// Uniformly random actions, for collecting training data.
    Random,
}

impl Controller {
    pub fn proactive(model: ApomdpModel, solver: SolverConfig) -> Self {
        let belief = Belief::initial(&model);
        Controller::Proactive { model, solver, belief }
    }

    pub fn name(&self) -> &'static str {
        match self {
            Controller::Proactive { .. } => "proactive",
            Controller::Reactive(_) => "reactive",
            Controller::Idle => "idle",
            Controller::Random => "random",
        }
    }

    pub fn belief(&self) -> Option<&Belief> {
        match self {
            Controller::Proactive { belief, .. } => Some(belief),
            _ => None,
        }
    }

    fn reset(&mut self) {
        match self {
            Controller::Proactive { model, belief, .. } => *belief = Belief::initial(model),
            Controller::Reactive(p) => p.reset(),
            Controller::Idle | Controller::Random => {}
        }
    }

    fn first_action(&mut self, seed: u64) -> RobotAction {
        match self {
            Controller::Proactive { model, solver, belief } => plan_action(model, belief, &solver.with_seed(seed)),
            Controller::Reactive(_) | Controller::Idle => RobotAction::Idle,
            Controller::Random => random_action(seed),
        }
    }

    fn decide(&mut self, previous: RobotAction, sigma: &ObservationVector, ticks: u32, seed: u64) -> RobotAction {
        match self {
            Controller::Proactive { model, solver, belief } => {
                *belief = belief_update(model, belief, previous, sigma).unwrap_or_else(|_| Belief::initial(model));
                plan_action(model, belief, &solver.with_seed(seed))
            }
            Controller::Reactive(p) => p.step(sigma, ticks),
            Controller::Idle => RobotAction::Idle,
            Controller::Random => random_action(seed),
        }
    }
}

fn random_action(seed: u64) -> RobotAction {
    use rand::seq::SliceRandom;
    *RobotAction::ALL.choose(&mut seed::rng(seed, &[])).expect("non-empty")
}

/// A simulated human and what it carries from one task to the next.
#[derive(Debug, Clone, PartialEq)]
pub struct Participant {
    pub model: HumanModel,
    pub counters: InteractionCounters,
    /// Subtasks handled in earlier tasks, which drive the learning effect.
    pub prior_subtasks: u32,
}

impl Participant {
    pub fn new(model: HumanModel) -> Self {
        Self { model, counters: InteractionCounters::default(), prior_subtasks: 0 }
    }

    pub fn human_type(&self) -> HumanType {
        self.model.human_type
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TickRecord {
    pub tick: u32,
    pub human_action: HumanAction,
    pub robot_action: RobotAction,
    /// The arm was carrying a cube while the human acted this tick.
    #[serde(default)]
    pub robot_busy: bool,
    pub sigma: ObservationVector,
    pub events: Vec<TriggerEvent>,
    pub score: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub placement: Option<Placement>,
    /// The robot decided at the end of this tick.
    #[serde(default)]
    pub decision: bool,
    /// Ground-truth robot-model state at a decision tick.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub state: Option<RobotState>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub belief_snapshot: Option<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeSummary {
    pub controller: String,
    pub human_type: HumanType,
    pub task_type: u8,
    pub num_subtasks: u32,
    pub n_s: u32,
    pub n_f: u32,
    pub n_s_human: u32,
    pub n_f_human: u32,
    pub n_s_robot: u32,
    pub n_f_robot: u32,
    pub human_attempts: u32,
    pub warnings: u32,
    pub task_success: bool,
    pub gamma: f64,
    pub discounted_return: f64,
    pub decisions: u32,
    pub ticks: u32,
}

/// Everything that happened in one task.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EpisodeLog {
    pub records: Vec<TickRecord>,
    pub summary: Option<EpisodeSummary>,
}

#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct SummaryLine {
    summary: EpisodeSummary,
}

impl EpisodeLog {
    /// Observations the robot decided on, in order.
    pub fn decision_observations(&self) -> Vec<ObservationVector> {
        self.records.iter().filter(|r| r.decision).map(|r| r.sigma).collect()
    }

    /// One JSON object per tick, then a `{"summary": ...}` line.
    pub fn write_jsonl<W: Write>(&self, mut w: W) -> Result<()> {
        for r in &self.records {
            serde_json::to_writer(&mut w, r)?;
            w.write_all(b"\n")?;
        }
        if let Some(summary) = &self.summary {
            serde_json::to_writer(&mut w, &SummaryLine { summary: summary.clone() })?;
            w.write_all(b"\n")?;
        }
        Ok(())
    }

    pub fn read_jsonl<R: BufRead>(r: R) -> Result<Self> {
        let mut log = EpisodeLog::default();
        for line in r.lines() {
            let line = line?;
            if line.trim().is_empty() {
                continue;
            }
            let value: serde_json::Value = serde_json::from_str(&line)?;
            if value.get("summary").is_some() {
                log.summary = Some(serde_json::from_value::<SummaryLine>(value)?.summary);
            } else {
                log.records.push(serde_json::from_value(value)?);
            }
        }
        Ok(log)
    }
}

/// Task rules and scoring shared by every episode of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct EpisodeSettings {
    pub task: TaskConfig,
    #[serde(default)]
    pub rewards: RewardSpec,
    #[serde(default = "default_gamma")]
    pub gamma: f64,
    #[serde(default)]
    pub record_beliefs: bool,
}

fn default_gamma() -> f64 {
    DEFAULT_GAMMA
}

impl EpisodeSettings {
    pub fn for_task(task: TaskConfig) -> Self {
        Self { task, rewards: RewardSpec::default(), gamma: DEFAULT_GAMMA, record_beliefs: false }
    }
}

/// Maps the simulator's ground truth to the robot model's state space.
fn annotate(human: HumanState, env: &EnvState, tick: &TickResult, previous: RobotState) -> RobotState {
    use RobotState::*;
    if env.is_terminal() {
        return if env.task_success() { GlobalSuccess } else { GlobalFail };
    }
    let human_failed = matches!(
        tick.placement,
        Some(Placement { actor: super::Actor::Human, outcome: super::SubtaskOutcome::Fail })
    );
    let stalled = env.cube.is_some_and(|c| c.holder == super::Holder::Belt && 2 * c.age >= env.config().belt_timeout_ticks);
    match human {
        HumanState::WarnTheRobot => WarningReceived,
        _ if human_failed => MayNotBeCapable,
        HumanState::NoAttention => MayHaveLostAttention,
        HumanState::Tired => MayBeTired,
        HumanState::LostMotivation => NeedsAssistance,
        _ if stalled => NeedsAssistance,
        HumanState::Working if previous.kind() == crate::apomdp::StateKind::Stage1 => NoAssistanceNeeded,
        _ => HumanNotStruggling,
    }
}

/// Runs one task to completion. The participant's counters and practice
/// are advanced at the end.
/// What the robot actually did over a decision interval: a command issued
/// while the arm is still carrying a cube does not stop the takeover.
pub fn effective_action(command: RobotAction, busy: bool) -> RobotAction {
    if busy && command != RobotAction::Cancel {
        RobotAction::TakeOver
    } else {
        command
    }
}

pub fn run_episode(
    settings: &EpisodeSettings,
    participant: &mut Participant,
    controller: &mut Controller,
    seed: u64,
) -> Result<EpisodeLog> {
    let EpisodeSettings { task, rewards, gamma, record_beliefs } = settings;
    let (gamma, record_beliefs) = (*gamma, *record_beliefs);
    let mut env = new_task(task, seed)?.with_human(participant.human_type(), participant.prior_subtasks).with_rewards(*rewards);
    let mut rng = seed::rng(seed, &[0x72756e]);
    controller.reset();

    let mut human_state = participant.model.initial;
    let mut warn_lock = 0u32;
    let mut command = controller.first_action(seed::derive(seed, &[0]));
    let mut decisions = 1u32;
    let mut ticks_since = 0u32;
    let mut interval_busy = false;
    let mut just_claimed = false;
    let mut target: Option<bool> = None;
    let mut prev_state = RobotState::TaskAssignedToHuman;
    let mut discount = 1.0;
    let mut discounted_return = 0.0;
    let mut records = Vec::new();
    let max_ticks = task.max_ticks();

    while !env.is_terminal() {
        if env.tick >= max_ticks {
            return Err(Error::Contract(format!("episode exceeded {max_ticks} ticks")));
        }
        let prev_action = env.last_human_action;
        let robot_busy = env.robot_moving();
        interval_busy |= robot_busy;
        let human_action = if env.human_grasping() {
            human_state = HumanState::Working;
            HumanAction::GraspAndPlace
        } else if warn_lock > 0 {
            warn_lock -= 1;
            HumanAction::Warn
        } else {
            // The human reacts to what the robot visibly does: a takeover
            // interferes on the tick the arm claims the cube, and the rest
            // of the motion is background.
            let seen = match (command, just_claimed, robot_busy) {
                (_, true, _) => RobotAction::TakeOver,
                (_, false, true) | (RobotAction::TakeOver, false, false) => RobotAction::Idle,
                (other, false, false) => other,
            };
            let (a, s) = step_human(&participant.model, human_state, seen, participant.counters, &mut rng)?;
            human_state = s;
            if a == HumanAction::Warn {
                warn_lock = task.warning_ticks.saturating_sub(1);
            }
            a
        };

        // A takeover targets the cube in play when it was decided: with none
        // in play the arm stays put rather than ambushing the next one, and
        // a cube the human has since picked up is left to them.
        let stale = match target {
            None => true,
            Some(from_belt) => from_belt && env.human_grasping(),
        };
        let applied = if command == RobotAction::TakeOver && stale { RobotAction::Idle } else { command };
        let mut result = env.tick(human_action, applied, &mut rng)?;
        if result.interfered {
            participant.counters.interferences += 1;
        }
        just_claimed = result.interfered;
        discounted_return += discount * result.reward;
        ticks_since += 1;

        let mut record = TickRecord {
            tick: env.tick,
            human_action,
            robot_action: command,
            robot_busy,
            sigma: result.sigma,
            events: result.events.clone(),
            score: result.reward,
            placement: result.placement,
            decision: false,
            state: None,
            belief_snapshot: None,
        };
        if !env.is_terminal() {
            let trigger = decision_trigger(prev_action, human_action, &result.events, ticks_since, false);
            if trigger == Trigger::TriggerNow {
                if result.events.is_empty() {
                    result.events.push(TriggerEvent::Timeout);
                    record.events.push(TriggerEvent::Timeout);
                }
                let state = annotate(human_state, &env, &result, prev_state);
                let effective = effective_action(command, interval_busy);
                command = controller.decide(effective, &result.sigma, ticks_since, seed::derive(seed, &[u64::from(decisions)]));
                record.decision = true;
                record.state = Some(state);
                if record_beliefs {
                    record.belief_snapshot = controller.belief().map(|b| b.probs().to_vec());
                }
                prev_state = state;
                decisions += 1;
                discount *= gamma;
                ticks_since = 0;
                interval_busy = false;
                target = env.cube.as_ref().map(|_| env.cube_on_belt());
            }
        } else {
            record.state = Some(annotate(human_state, &env, &result, prev_state));
        }
        records.push(record);
    }

    participant.counters.tasks += 1;
    participant.prior_subtasks += env.subtasks_done;
    let summary = EpisodeSummary {
        controller: controller.name().to_string(),
        human_type: participant.human_type(),
        task_type: task.task_type,
        num_subtasks: task.num_subtasks,
        n_s: env.n_s,
        n_f: env.n_f,
        n_s_human: env.n_s_human,
        n_f_human: env.n_f_human,
        n_s_robot: env.n_s_robot,
        n_f_robot: env.n_f_robot,
        human_attempts: env.n_s_human + env.n_f_human,
        warnings: env.warnings,
        task_success: env.task_success(),
        gamma,
        discounted_return,
        decisions,
        ticks: env.tick,
    };
    Ok(EpisodeLog { records, summary: Some(summary) })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::{build_base_model, make_reactive_policy, DEFAULT_GAMMA};
    use crate::human::build_human_model;

    fn participant(index: usize) -> Participant {
        Participant::new(build_human_model(HumanType::from_index(index).unwrap(), 0))
    }

    fn run(controller: &mut Controller, p: &mut Participant, seed: u64) -> EpisodeLog {
        let settings = EpisodeSettings { record_beliefs: true, ..EpisodeSettings::for_task(TaskConfig::of_type(2)) };
        run_episode(&settings, p, controller, seed).unwrap()
    }

    #[test]
    fn episodes_conserve_counts() {
        let model = build_base_model(RewardSpec::default(), DEFAULT_GAMMA).unwrap();
        let mut controllers = vec![
            Controller::proactive(model, SolverConfig::default()),
            Controller::Reactive(make_reactive_policy(10).unwrap()),
            Controller::Idle,
        ];
        for c in controllers.iter_mut() {
            for index in [0, 6, 15] {
                let mut p = participant(index);
                for seed in 0..3 {
                    let log = run(c, &mut p, seed);
                    let s = log.summary.unwrap();
                    assert_eq!(s.n_s + s.n_f, s.num_subtasks);
                    assert_eq!(s.n_s, s.n_s_human + s.n_s_robot);
                    assert_eq!(s.n_f, s.n_f_human + s.n_f_robot);
                    if c.name() == "idle" {
                        assert_eq!(s.n_s_robot + s.n_f_robot, 0);
                    }
                }
                assert_eq!(p.counters.tasks, 3);
                assert_eq!(p.prior_subtasks, 30);
            }
        }
    }

    #[test]
    fn decisions_are_at_most_three_ticks_apart() {
        let model = build_base_model(RewardSpec::default(), DEFAULT_GAMMA).unwrap();
        let mut c = Controller::proactive(model, SolverConfig::default());
        let log = run(&mut c, &mut participant(3), 9);
        let mut last = 0;
        for r in &log.records {
            if r.decision {
                assert!(r.tick - last <= 3);
                last = r.tick;
                assert!(r.state.is_some());
                assert!(r.belief_snapshot.is_some());
            }
            if r.human_action == HumanAction::Warn {
                assert!(r.sigma.get(crate::apomdp::Flag::WarnsRobot));
                assert!(r.events.contains(&TriggerEvent::WarningInterrupt));
            }
        }
        let last_record = log.records.last().unwrap();
        let s = log.summary.as_ref().unwrap();
        assert_eq!(last_record.sigma.get(crate::apomdp::Flag::TaskSuccess), s.task_success);
        assert_eq!(last_record.sigma.get(crate::apomdp::Flag::TaskFail), !s.task_success);
    }

    #[test]
    fn runs_are_deterministic_and_logs_round_trip() {
        let mut c = Controller::Reactive(make_reactive_policy(10).unwrap());
        let a = run(&mut c, &mut participant(5), 42);
        let b = run(&mut c, &mut participant(5), 42);
        assert_eq!(a, b);
        let mut buf = Vec::new();
        a.write_jsonl(&mut buf).unwrap();
        let back = EpisodeLog::read_jsonl(&buf[..]).unwrap();
        assert_eq!(back, a);
    }
}

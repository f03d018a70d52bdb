use rand::Rng;
use serde::{Deserialize, Serialize};

use super::{HumanAction, HumanState, HumanType, InteractionCounters, Level, RobotContext, NUM_HUMAN_STATES};
use crate::apomdp::RobotAction;
use crate::error::{Error, Result};
use crate::seed;

const N: usize = NUM_HUMAN_STATES;
const CONTEXTS: usize = 3;

/// Counter-driven adjustments. The probability of moving to the target
/// state becomes `p + (max - p) * sigmoid(alpha * counter - beta)`, and the
/// rest of the row is rescaled to keep it normalized.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Modifiers {
    pub warn_alpha: f64,
    pub warn_beta: f64,
    pub warn_max: f64,
    pub tired_alpha: f64,
    pub tired_beta: f64,
    pub tired_max: f64,
}

impl Modifiers {
    fn for_type(t: &HumanType) -> Self {
        let (warn_alpha, warn_beta) = match t.collaborativeness {
            Level::Low => (0.3, 2.0),
            Level::High => (0.15, 4.0),
        };
        let (tired_alpha, tired_beta) = match t.stamina {
            Level::Low => (0.12, 4.0),
            Level::High => (0.05, 5.0),
        };
        Self { warn_alpha, warn_beta, warn_max: 0.8, tired_alpha, tired_beta, tired_max: 0.35 }
    }
}

/// A simulated human: transition table per robot context, per-state
/// rewards, and the counter modifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanModel {
    #[serde(rename = "type")]
    pub human_type: HumanType,
    /// `[context][s][s']`
    #[serde(rename = "T")]
    transitions: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "R")]
    rewards: Vec<f64>,
    pub gamma: f64,
    pub modifiers: Modifiers,
    #[serde(default = "default_initial")]
    pub initial: HumanState,
}

fn default_initial() -> HumanState {
    HumanState::Attending
}

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

/// Sets `row[target]` to `p` and rescales the other entries so the row
/// still sums to one.
fn pin(row: &mut [f64; N], target: usize, p: f64) {
    let rest = 1.0 - row[target];
    if rest <= 0.0 {
        return;
    }
    let scale = (1.0 - p) / rest;
    for (i, v) in row.iter_mut().enumerate() {
        if i != target {
            *v *= scale;
        }
    }
    row[target] = p;
}

fn normalize(row: &mut [f64]) {
    let sum: f64 = row.iter().sum();
    row.iter_mut().for_each(|p| *p /= sum);
}

use HumanState::*;

/// Passive-context weights over the seven non-terminal states, in state
/// order: attending, evaluating, working, no attention, tired, lost
/// motivation, warning.
fn passive_weights(s: HumanState) -> [f64; 7] {
    match s {
        Attending => [0.15, 0.45, 0.25, 0.06, 0.03, 0.03, 0.003],
        Evaluating => [0.10, 0.25, 0.50, 0.06, 0.03, 0.03, 0.003],
        Working => [0.45, 0.15, 0.25, 0.06, 0.04, 0.02, 0.003],
        NoAttention => [0.30, 0.05, 0.05, 0.50, 0.04, 0.04, 0.003],
        Tired => [0.25, 0.05, 0.05, 0.05, 0.55, 0.03, 0.003],
        LostMotivation => [0.25, 0.03, 0.02, 0.05, 0.03, 0.60, 0.003],
        WarnTheRobot => [0.45, 0.15, 0.15, 0.05, 0.05, 0.05, 0.10],
        GlobalSuccess | GlobalFail => unreachable!("terminal rows are fixed"),
    }
}

/// How much of a robot takeover a human in state `s` notices: fully when
/// engaged with the task, partly when distracted or tired, not at all when
/// gone.
fn exposure(s: HumanState) -> f64 {
    match s {
        Attending | Evaluating | Working | WarnTheRobot => 1.0,
        NoAttention | Tired => 0.5,
        LostMotivation | GlobalSuccess | GlobalFail => 0.0,
    }
}

fn context_weights(t: &HumanType, ctx: RobotContext, s: HumanState) -> [f64; 7] {
    let mut w = passive_weights(s);
    let (att, eval, work, noatt, tired, lost, warn) = (0, 1, 2, 3, 4, 5, 6);

    if t.attention.is_low() {
        w[noatt] *= 3.0;
        if s == NoAttention {
            w[noatt] = 0.7 * 3.0;
        }
    }
    if t.expertise.is_low() {
        w[eval] *= 2.0;
    }
    if t.stamina.is_low() {
        w[tired] *= 2.0;
        w[lost] *= 1.3;
    }
    if t.collaborativeness.is_low() {
        w[lost] *= 1.5;
        if ctx != RobotContext::Interfere {
            w[warn] *= 2.0;
        }
    }

    match ctx {
        RobotContext::Passive => {}
        RobotContext::Remind => {
            // A reminder pulls an absent-minded human back to the task.
            if let Some(own) = match s {
                NoAttention => Some(noatt),
                Tired => Some(tired),
                LostMotivation => Some(lost),
                _ => None,
            } {
                let moved = w[own] * 0.8;
                w[own] -= moved;
                w[att] += moved;
            }
        }
        RobotContext::Interfere => {
            // The robot holds the cube, so the human cannot work on it and
            // may object, depending on how much of it they notice.
            w[work] *= 0.2;
            let exposure = exposure(s);
            if exposure > 0.0 {
                let total: f64 = w.iter().sum::<f64>() - w[warn];
                let base_warn: f64 = if t.collaborativeness.is_low() { 0.45 } else { 0.12 };
                let base_warn = if s == WarnTheRobot { base_warn.max(0.3) } else { base_warn * exposure };
                w[warn] = total * base_warn / (1.0 - base_warn);
            }
        }
    }
    w
}

/// Instantiates the type-biased tables with a small seeded jitter, so that
/// two participants of the same type are not identical.
pub fn build_human_model(t: HumanType, seed: u64) -> HumanModel {
    let mut rng = seed::rng(seed, &[0x6875_6d61, t.index() as u64]);
    let mut transitions = vec![vec![vec![0.0; N]; N]; CONTEXTS];
    for ctx in RobotContext::ALL {
        for s in HumanState::ALL {
            let row = &mut transitions[ctx.index()][s.index()];
            if s.is_terminal() {
                row[s.index()] = 1.0;
                continue;
            }
            let w = context_weights(&t, ctx, s);
            for (dst, &v) in row.iter_mut().zip(&w) {
                *dst = v * rng.gen_range(0.85..1.15);
            }
            normalize(row);
        }
    }
    let mut rewards = vec![0.0; N];
    rewards[GlobalSuccess.index()] = 10.0;
    rewards[GlobalFail.index()] = -10.0;
    rewards[Working.index()] = if t.expertise.is_low() { 0.5 } else { 1.0 };
    if t.attention.is_low() {
        rewards[NoAttention.index()] = 1.0;
    }
    rewards[Tired.index()] = if t.stamina.is_low() { 0.5 } else { -0.5 };
    if t.collaborativeness.is_low() {
        rewards[WarnTheRobot.index()] = 0.5;
    }
    HumanModel {
        human_type: t,
        transitions,
        rewards,
        gamma: 0.9,
        modifiers: Modifiers::for_type(&t),
        initial: Attending,
    }
}

impl HumanModel {
    /// Builds a model from explicit passive/remind/interfere tables.
    pub fn from_tables(
        human_type: HumanType,
        transitions: Vec<Vec<Vec<f64>>>,
        modifiers: Modifiers,
        initial: HumanState,
    ) -> Result<Self> {
        let ok = transitions.len() == CONTEXTS
            && transitions.iter().all(|ctx| {
                ctx.len() == N
                    && ctx.iter().all(|row| {
                        row.len() == N
                            && row.iter().all(|p| (0.0..=1.0).contains(p))
                            && (row.iter().sum::<f64>() - 1.0).abs() < 1e-9
                    })
            });
        if !ok {
            return Err(Error::Config("human transition table is malformed".into()));
        }
        Ok(Self { human_type, transitions, rewards: vec![0.0; N], gamma: 0.9, modifiers, initial })
    }

    pub fn reward(&self, s: HumanState) -> f64 {
        self.rewards[s.index()]
    }

    /// Base row for `(s, ctx)` before the counter modifiers.
    pub fn base_row(&self, s: HumanState, ctx: RobotContext) -> &[f64] {
        &self.transitions[ctx.index()][s.index()]
    }

    /// The transition row actually used for sampling.
    pub fn effective_row(&self, s: HumanState, ctx: RobotContext, counters: InteractionCounters) -> [f64; N] {
        let mut row = [0.0; N];
        row.copy_from_slice(self.base_row(s, ctx));
        if s.is_terminal() {
            return row;
        }
        let m = &self.modifiers;
        if ctx == RobotContext::Interfere && exposure(s) > 0.0 {
            let w = WarnTheRobot.index();
            let p = row[w];
            let max = (m.warn_max * exposure(s)).max(p);
            let target = p + (max - p) * sigmoid(m.warn_alpha * f64::from(counters.interferences) - m.warn_beta);
            pin(&mut row, w, target);
        }
        let t = Tired.index();
        let p = row[t];
        let target = p + (m.tired_max.max(p) - p) * sigmoid(m.tired_alpha * f64::from(counters.tasks) - m.tired_beta);
        pin(&mut row, t, target);
        row
    }
}

/// Samples the next state of mind and the action it emits.
pub fn step_human<R: Rng>(
    model: &HumanModel,
    state: HumanState,
    robot_action: RobotAction,
    counters: InteractionCounters,
    rng: &mut R,
) -> Result<(HumanAction, HumanState)> {
    if state.is_terminal() {
        return Err(Error::Contract(format!("cannot step a human in terminal state {state:?}")));
    }
    let row = model.effective_row(state, RobotContext::from(robot_action), counters);
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut next = state;
    for (i, &p) in row.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        next = HumanState::ALL[i];
        if u < acc {
            break;
        }
    }
    Ok((next.action(), next))
}

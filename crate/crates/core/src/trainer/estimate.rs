use serde::{Deserialize, Serialize};

use crate::apomdp::{ApomdpModel, ObservationVector, RobotState, NUM_ACTIONS, NUM_FLAGS};
use crate::env::{effective_action, EpisodeLog};
use crate::error::{config, Error, Result};

/// One decision interval with ground-truth states: the state when the
/// action was chosen, the action, the state at the next decision, and the
/// observation seen there.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct AnnotatedStep {
    pub state: usize,
    pub action: usize,
    pub next: usize,
    pub sigma: ObservationVector,
}

/// Smoothed maximum-likelihood tables with the counts behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct TableEstimate {
    pub num_states: usize,
    pub num_actions: usize,
    /// `[s][a][s']`, flattened.
    pub transitions: Vec<f64>,
    /// `[s'][a][flag]`, flattened.
    pub flag_rates: Vec<f64>,
    /// Samples per `(s, a)` transition row.
    pub transition_counts: Vec<u64>,
    /// Samples per `(s', a)` observation row.
    pub observation_counts: Vec<u64>,
}

impl TableEstimate {
    pub fn transition_row(&self, s: usize, a: usize) -> &[f64] {
        let n = self.num_states;
        let start = (s * self.num_actions + a) * n;
        &self.transitions[start..start + n]
    }

    pub fn flag_rates(&self, next: usize, a: usize) -> &[f64] {
        let start = (next * self.num_actions + a) * NUM_FLAGS;
        &self.flag_rates[start..start + NUM_FLAGS]
    }
}

/// Counts transitions and flags, with add-one smoothing on every
/// transition entry and Laplace smoothing on every flag rate.
pub fn estimate_tables(steps: &[AnnotatedStep], num_states: usize, num_actions: usize) -> Result<TableEstimate> {
    if steps.is_empty() {
        return Err(Error::EmptyTraces);
    }
    if num_states == 0 || num_actions == 0 {
        return Err(config("estimation needs at least one state and one action"));
    }
    let n = num_states;
    let mut t_counts = vec![0u64; n * num_actions * n];
    let mut row_counts = vec![0u64; n * num_actions];
    let mut flag_on = vec![0u64; n * num_actions * NUM_FLAGS];
    let mut obs_counts = vec![0u64; n * num_actions];
    for step in steps {
        if step.state >= n || step.next >= n || step.action >= num_actions {
            return Err(config(format!("annotated step {step:?} is out of range")));
        }
        let row = step.state * num_actions + step.action;
        t_counts[row * n + step.next] += 1;
        row_counts[row] += 1;
        let orow = step.next * num_actions + step.action;
        obs_counts[orow] += 1;
        for (k, &on) in step.sigma.flags().iter().enumerate() {
            if on {
                flag_on[orow * NUM_FLAGS + k] += 1;
            }
        }
    }
    let transitions = t_counts
        .iter()
        .enumerate()
        .map(|(i, &c)| (c + 1) as f64 / (row_counts[i / n] + n as u64) as f64)
        .collect();
    let flag_rates = flag_on
        .iter()
        .enumerate()
        .map(|(i, &c)| (c + 1) as f64 / (obs_counts[i / NUM_FLAGS] + 2) as f64)
        .collect();
    Ok(TableEstimate {
        num_states,
        num_actions,
        transitions,
        flag_rates,
        transition_counts: row_counts,
        observation_counts: obs_counts,
    })
}

/// Decision intervals of one episode, starting from the task-assigned state.
pub fn annotated_steps(log: &EpisodeLog) -> Vec<AnnotatedStep> {
    let mut steps = Vec::new();
    let mut state = RobotState::TaskAssignedToHuman.index();
    let mut busy = false;
    for r in &log.records {
        busy |= r.robot_busy;
        if let Some(next) = r.state {
            let action = effective_action(r.robot_action, busy);
            steps.push(AnnotatedStep { state, action: action.index(), next: next.index(), sigma: r.sigma });
            state = next.index();
            busy = false;
        }
    }
    steps
}

/// Replaces the rows of `base` that have at least `min_count` samples with
/// their estimates; thinner rows keep the hand-authored values.
pub fn calibrate_model(base: &ApomdpModel, est: &TableEstimate, min_count: u64) -> Result<ApomdpModel> {
    let n = base.num_states();
    if est.num_states != n || est.num_actions != NUM_ACTIONS {
        return Err(config("estimate does not match the model's shape"));
    }
    let mut transitions = Vec::with_capacity(n * NUM_ACTIONS * n);
    let mut flags = Vec::with_capacity(n * NUM_ACTIONS * NUM_FLAGS);
    for s in 0..n {
        for a in crate::apomdp::RobotAction::ALL {
            let row = s * NUM_ACTIONS + a.index();
            if est.transition_counts[row] >= min_count {
                transitions.extend_from_slice(est.transition_row(s, a.index()));
            } else {
                transitions.extend_from_slice(base.transition_row(s, a));
            }
            if est.observation_counts[row] >= min_count {
                flags.extend_from_slice(est.flag_rates(s, a.index()));
            } else {
                flags.extend_from_slice(base.flag_rates(s, a));
            }
        }
    }
    base.with_estimated_tables(&transitions, &flags)
}

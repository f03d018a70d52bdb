use serde::{Deserialize, Serialize};

use super::{ObservationVector, RewardSpec, RobotAction, NUM_ACTIONS, NUM_FLAGS};
use crate::error::{config, Error, Result};

const ROW_TOLERANCE: f64 = 1e-9;

/// A discrete POMDP over the five robot actions and the 9-flag observation
/// space. Tables are stored flat; the JSON form uses nested arrays.
///
/// The base model has the 11 anticipation states, but the type is generic
/// over the state count so that small hand-built instances (and test
/// oracles) share the same machinery.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(into = "ModelDoc", try_from = "ModelDoc")]
pub struct ApomdpModel {
    states: Vec<String>,
    gamma: f64,
    initial_state: usize,
    terminal: Vec<bool>,
    reward_spec: Option<RewardSpec>,
    /// `[s][a]`
    rewards: Vec<f64>,
    /// `[s][a][s']`
    transitions: Vec<f64>,
    /// `[s'][a][flag]` = P(flag is set | s', a)
    observations: Vec<f64>,
}

impl ApomdpModel {
    /// Assembles and validates a model from nested tables.
    pub fn from_tables(
        states: Vec<String>,
        gamma: f64,
        initial_state: usize,
        terminal_states: &[usize],
        rewards: Vec<[f64; NUM_ACTIONS]>,
        transitions: Vec<Vec<Vec<f64>>>,
        observations: Vec<Vec<[f64; NUM_FLAGS]>>,
    ) -> Result<Self> {
        let n = states.len();
        if rewards.len() != n || transitions.len() != n || observations.len() != n {
            return Err(config("table sizes do not match the state count"));
        }
        let mut terminal = vec![false; n];
        for &t in terminal_states {
            *terminal
                .get_mut(t)
                .ok_or_else(|| config(format!("terminal state {t} out of range")))? = true;
        }
        let mut flat_t = Vec::with_capacity(n * NUM_ACTIONS * n);
        for rows in &transitions {
            if rows.len() != NUM_ACTIONS {
                return Err(config("each T block needs one row per action"));
            }
            for row in rows {
                if row.len() != n {
                    return Err(config("T row length does not match the state count"));
                }
                flat_t.extend_from_slice(row);
            }
        }
        let mut flat_o = Vec::with_capacity(n * NUM_ACTIONS * NUM_FLAGS);
        for rows in &observations {
            if rows.len() != NUM_ACTIONS {
                return Err(config("each O block needs one row per action"));
            }
            for row in rows {
                flat_o.extend_from_slice(row);
            }
        }
        let model = Self {
            states,
            gamma,
            initial_state,
            terminal,
            reward_spec: None,
            rewards: rewards.into_iter().flatten().collect(),
            transitions: flat_t,
            observations: flat_o,
        };
        model.validate()?;
        Ok(model)
    }

    pub(crate) fn with_reward_spec(mut self, spec: RewardSpec) -> Self {
        self.reward_spec = Some(spec);
        self
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.num_states();
        if n == 0 {
            return Err(config("model has no states"));
        }
        if !(self.gamma > 0.0 && self.gamma < 1.0) {
            return Err(config(format!("gamma {} outside (0, 1)", self.gamma)));
        }
        if self.initial_state >= n {
            return Err(config("initial state out of range"));
        }
        if self.rewards.iter().any(|r| !r.is_finite()) {
            return Err(config("non-finite reward"));
        }
        for s in 0..n {
            for a in RobotAction::ALL {
                let row = self.transition_row(s, a);
                if row.iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(config(format!("T({s},{a}) has an entry outside [0,1]")));
                }
                let sum: f64 = row.iter().sum();
                if (sum - 1.0).abs() > ROW_TOLERANCE {
                    return Err(config(format!("T({s},{a}) sums to {sum}")));
                }
                if self.terminal[s] && row[s] != 1.0 {
                    return Err(config(format!("terminal state {s} is not absorbing")));
                }
                if self.flag_rates(s, a).iter().any(|&p| !(0.0..=1.0).contains(&p)) {
                    return Err(config(format!("O({s},{a}) has a rate outside [0,1]")));
                }
            }
        }
        Ok(())
    }

    pub fn num_states(&self) -> usize {
        self.states.len()
    }

    pub fn state_names(&self) -> &[String] {
        &self.states
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn initial_state(&self) -> usize {
        self.initial_state
    }

    pub fn is_terminal(&self, s: usize) -> bool {
        self.terminal[s]
    }

    pub fn reward_spec(&self) -> Option<&RewardSpec> {
        self.reward_spec.as_ref()
    }

    pub fn reward(&self, s: usize, a: RobotAction) -> f64 {
        self.rewards[s * NUM_ACTIONS + a.index()]
    }

    pub fn max_reward(&self) -> f64 {
        self.rewards.iter().copied().fold(f64::NEG_INFINITY, f64::max)
    }

    /// T(· | s, a)
    pub fn transition_row(&self, s: usize, a: RobotAction) -> &[f64] {
        let n = self.num_states();
        let start = (s * NUM_ACTIONS + a.index()) * n;
        &self.transitions[start..start + n]
    }

    pub fn transition(&self, s: usize, a: RobotAction, next: usize) -> f64 {
        self.transition_row(s, a)[next]
    }

    /// Per-flag Bernoulli rates of O(· | s', a).
    pub fn flag_rates(&self, next: usize, a: RobotAction) -> &[f64] {
        let start = (next * NUM_ACTIONS + a.index()) * NUM_FLAGS;
        &self.observations[start..start + NUM_FLAGS]
    }

    /// O(σ | s', a) under the factored per-flag model.
    pub fn observation_likelihood(&self, next: usize, a: RobotAction, sigma: &ObservationVector) -> f64 {
        self.flag_rates(next, a)
            .iter()
            .zip(sigma.flags())
            .map(|(&p, &on)| if on { p } else { 1.0 - p })
            .product()
    }

    pub(crate) fn transitions_mut(&mut self) -> &mut [f64] {
        &mut self.transitions
    }

    pub(crate) fn observations_mut(&mut self) -> &mut [f64] {
        &mut self.observations
    }

    #[cfg(test)]
    pub(crate) fn raw_transitions(&self) -> &[f64] {
        &self.transitions
    }

    #[cfg(test)]
    pub(crate) fn raw_observations(&self) -> &[f64] {
        &self.observations
    }

    /// Replaces T and O, keeping the structural zeros (and ones) of the
    /// current tables and the absorbing terminal rows.
    pub fn with_estimated_tables(&self, transitions: &[f64], flag_rates: &[f64]) -> Result<Self> {
        if transitions.len() != self.transitions.len() || flag_rates.len() != self.observations.len() {
            return Err(config("estimated tables have the wrong shape"));
        }
        let n = self.num_states();
        let mut out = self.clone();
        for (row_idx, row) in out.transitions.chunks_mut(n).enumerate() {
            let s = row_idx / NUM_ACTIONS;
            if self.terminal[s] {
                continue;
            }
            let src = &transitions[row_idx * n..(row_idx + 1) * n];
            let base = &self.transitions[row_idx * n..(row_idx + 1) * n];
            for ((dst, &est), &b) in row.iter_mut().zip(src).zip(base) {
                *dst = if b == 0.0 { 0.0 } else { est };
            }
            let sum: f64 = row.iter().sum();
            if sum <= 0.0 {
                row.copy_from_slice(base);
            } else {
                row.iter_mut().for_each(|p| *p /= sum);
            }
        }
        for ((dst, &est), &b) in out.observations.iter_mut().zip(flag_rates).zip(&self.observations) {
            *dst = if b == 0.0 || b == 1.0 { b } else { est.clamp(1e-6, 1.0 - 1e-6) };
        }
        out.validate()?;
        Ok(out)
    }
}

/// JSON layout of a model document.
#[derive(Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
struct ModelDoc {
    states: Vec<String>,
    actions: Vec<RobotAction>,
    gamma: f64,
    rewards: Vec<[f64; NUM_ACTIONS]>,
    #[serde(rename = "T")]
    t: Vec<Vec<Vec<f64>>>,
    #[serde(rename = "O")]
    o: Vec<Vec<[f64; NUM_FLAGS]>>,
    initial_state: usize,
    terminal_states: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    reward_spec: Option<RewardSpec>,
}

impl From<ApomdpModel> for ModelDoc {
    fn from(m: ApomdpModel) -> Self {
        let n = m.num_states();
        let t = (0..n)
            .map(|s| RobotAction::ALL.iter().map(|&a| m.transition_row(s, a).to_vec()).collect())
            .collect();
        let o = (0..n)
            .map(|s| {
                RobotAction::ALL
                    .iter()
                    .map(|&a| {
                        let mut row = [0.0; NUM_FLAGS];
                        row.copy_from_slice(m.flag_rates(s, a));
                        row
                    })
                    .collect()
            })
            .collect();
        let rewards = (0..n)
            .map(|s| {
                let mut row = [0.0; NUM_ACTIONS];
                for a in RobotAction::ALL {
                    row[a.index()] = m.reward(s, a);
                }
                row
            })
            .collect();
        let terminal_states = (0..n).filter(|&s| m.terminal[s]).collect();
        ModelDoc {
            states: m.states,
            actions: RobotAction::ALL.to_vec(),
            gamma: m.gamma,
            rewards,
            t,
            o,
            initial_state: m.initial_state,
            terminal_states,
            reward_spec: m.reward_spec,
        }
    }
}

impl TryFrom<ModelDoc> for ApomdpModel {
    type Error = Error;

    fn try_from(doc: ModelDoc) -> Result<Self> {
        if doc.actions != RobotAction::ALL {
            return Err(config("action list must be Idle, Plan, TakeOver, PointToRemind, Cancel"));
        }
        let mut model = ApomdpModel::from_tables(
            doc.states,
            doc.gamma,
            doc.initial_state,
            &doc.terminal_states,
            doc.rewards,
            doc.t,
            doc.o,
        )?;
        model.reward_spec = doc.reward_spec;
        Ok(model)
    }
}

//! Online action selection by depth-bounded lookahead over the belief tree.
//!
//! `plan_action` expands every action at every node and, below each action,
//! either `width` sampled observations (merged when they coincide) or, with
//! `enumerate`, every observation with nonzero probability weighted by that
//! probability. `exact_plan` is a brute-force reference used to check it.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::apomdp::{belief_update, ApomdpModel, Belief, ObservationVector, RobotAction, NUM_ACTIONS, NUM_FLAGS};
use crate::error::{config, Error, Result};
use crate::seed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SolverConfig {
    /// Lookahead horizon in decision steps.
    pub depth: usize,
    /// Observation samples per action node.
    pub width: usize,
    pub seed: u64,
    /// Weight every reachable observation exactly instead of sampling.
    pub enumerate: bool,
    /// With `enumerate`, observation branches less likely than this are
    /// dropped and the rest renormalized. Zero keeps every branch.
    pub prune: f64,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self { depth: 3, width: 8, seed: 0, enumerate: false, prune: 0.0 }
    }
}

impl SolverConfig {
    pub fn validate(&self) -> Result<()> {
        if self.depth == 0 || self.width == 0 {
            return Err(config("solver depth and width must be at least 1"));
        }
        if !(0.0..1.0).contains(&self.prune) {
            return Err(config("pruning threshold must be in [0, 1)"));
        }
        Ok(())
    }

    pub fn with_seed(self, seed: u64) -> Self {
        Self { seed, ..self }
    }
}

fn argmax(q: &[f64; NUM_ACTIONS]) -> RobotAction {
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if q[a] > q[best] {
            best = a;
        }
    }
    RobotAction::ALL[best]
}

struct Lookahead<'m, R> {
    model: &'m ApomdpModel,
    cfg: SolverConfig,
    rng: R,
}

impl<R: Rng> Lookahead<'_, R> {
    fn value(&mut self, b: &Belief, depth: usize) -> f64 {
        if depth == 0 {
            return 0.0;
        }
        RobotAction::ALL
            .iter()
            .map(|&a| self.q(b, a, depth))
            .fold(f64::NEG_INFINITY, f64::max)
    }

    fn q(&mut self, b: &Belief, a: RobotAction, depth: usize) -> f64 {
        let immediate = b.expected_reward(self.model, a);
        if depth <= 1 {
            return immediate;
        }
        let future = if self.cfg.enumerate {
            self.enumerated_future(b, a, depth)
        } else {
            self.sampled_future(b, a, depth)
        };
        immediate + self.model.gamma() * future
    }

    fn sampled_future(&mut self, b: &Belief, a: RobotAction, depth: usize) -> f64 {
        let mut seen: Vec<(ObservationVector, usize)> = Vec::with_capacity(self.cfg.width);
        for _ in 0..self.cfg.width {
            let sigma = self.sample_observation(b, a);
            match seen.iter_mut().find(|(s, _)| *s == sigma) {
                Some((_, count)) => *count += 1,
                None => seen.push((sigma, 1)),
            }
        }
        let mut total = 0.0;
        for (sigma, count) in seen {
            if let Ok(next) = belief_update(self.model, b, a, &sigma) {
                total += count as f64 * self.value(&next, depth - 1);
            }
        }
        total / self.cfg.width as f64
    }

    fn sample_observation(&mut self, b: &Belief, a: RobotAction) -> ObservationVector {
        let s = sample_index(&mut self.rng, b.probs());
        let next = sample_index(&mut self.rng, self.model.transition_row(s, a));
        let mut flags = [false; NUM_FLAGS];
        for (f, &p) in flags.iter_mut().zip(self.model.flag_rates(next, a)) {
            *f = self.rng.gen::<f64>() < p;
        }
        ObservationVector::new(flags)
    }

    fn enumerated_future(&mut self, b: &Belief, a: RobotAction, depth: usize) -> f64 {
        let predicted = b.predict(self.model, a);
        let mut leaves = Vec::new();
        let mut flags = [false; NUM_FLAGS];
        self.branch(a, &predicted, 0, &mut flags, &mut leaves);
        let covered: f64 = leaves.iter().map(|(mass, _)| mass).sum();
        if covered <= 0.0 {
            return 0.0;
        }
        let mut total = 0.0;
        for (mass, weights) in leaves {
            if let Some(next) = Belief::from_weights(weights) {
                total += mass * self.value(&next, depth - 1);
            }
        }
        total / covered
    }

    /// Splits the predicted state weights on one flag at a time, dropping
    /// branches whose probability falls below the pruning threshold.
    fn branch(
        &self,
        a: RobotAction,
        weights: &[f64],
        flag: usize,
        flags: &mut [bool; NUM_FLAGS],
        leaves: &mut Vec<(f64, Vec<f64>)>,
    ) {
        if flag == NUM_FLAGS {
            leaves.push((weights.iter().sum(), weights.to_vec()));
            return;
        }
        for on in [false, true] {
            let next: Vec<f64> = weights
                .iter()
                .enumerate()
                .map(|(s, &w)| {
                    if w == 0.0 {
                        return 0.0;
                    }
                    let p = self.model.flag_rates(s, a)[flag];
                    w * if on { p } else { 1.0 - p }
                })
                .collect();
            let mass: f64 = next.iter().sum();
            if mass <= 0.0 || mass < self.cfg.prune {
                continue;
            }
            flags[flag] = on;
            self.branch(a, &next, flag + 1, flags, leaves);
        }
    }
}

fn sample_index<R: Rng>(rng: &mut R, probs: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    let mut last = 0;
    for (i, &p) in probs.iter().enumerate() {
        if p <= 0.0 {
            continue;
        }
        acc += p;
        last = i;
        if u < acc {
            return i;
        }
    }
    last
}

/// Root action values Q(b, a) of the lookahead, in action order.
pub fn q_values(model: &ApomdpModel, belief: &Belief, cfg: &SolverConfig) -> [f64; NUM_ACTIONS] {
    let mut search = Lookahead { model, cfg: *cfg, rng: seed::rng(cfg.seed, &[]) };
    let mut q = [0.0; NUM_ACTIONS];
    for a in RobotAction::ALL {
        q[a.index()] = search.q(belief, a, cfg.depth.max(1));
    }
    q
}

/// Picks the action with the highest lookahead value; ties go to the
/// earliest action. A belief already resting on terminal states gets `Idle`.
pub fn plan_action(model: &ApomdpModel, belief: &Belief, cfg: &SolverConfig) -> RobotAction {
    if belief.terminal_mass(model) >= 1.0 - 1e-12 {
        return RobotAction::Idle;
    }
    argmax(&q_values(model, belief, cfg))
}

const EXACT_MAX_STATES: usize = 4;
const EXACT_MAX_HORIZON: usize = 5;

/// Finite-horizon optimum by full expansion over every action and every
/// one of the 2^9 observation vectors. Only for tiny instances.
pub fn exact_plan(model: &ApomdpModel, belief: &Belief, horizon: usize) -> Result<(RobotAction, f64)> {
    let n = model.num_states();
    if n > EXACT_MAX_STATES || horizon > EXACT_MAX_HORIZON {
        return Err(Error::SizeGuard { states: n, horizon });
    }
    if belief.len() != n {
        return Err(config("belief length does not match the model"));
    }
    if horizon == 0 {
        return Ok((RobotAction::Idle, 0.0));
    }
    let q: Vec<f64> = RobotAction::ALL
        .iter()
        .map(|&a| exact_q(model, belief.probs(), a, horizon))
        .collect();
    let mut best = 0;
    for a in 1..NUM_ACTIONS {
        if q[a] > q[best] {
            best = a;
        }
    }
    Ok((RobotAction::ALL[best], q[best]))
}

fn exact_value(model: &ApomdpModel, b: &[f64], horizon: usize) -> f64 {
    if horizon == 0 {
        return 0.0;
    }
    let mut best = f64::NEG_INFINITY;
    for a in RobotAction::ALL {
        best = best.max(exact_q(model, b, a, horizon));
    }
    best
}

fn exact_q(model: &ApomdpModel, b: &[f64], a: RobotAction, horizon: usize) -> f64 {
    let n = b.len();
    let mut value = 0.0;
    for s in 0..n {
        value += b[s] * model.reward(s, a);
    }
    if horizon == 1 {
        return value;
    }
    let mut future = 0.0;
    for bits in 0u16..(1 << NUM_FLAGS) {
        let sigma = ObservationVector::from_bits(bits);
        let mut joint = vec![0.0; n];
        for (next, j) in joint.iter_mut().enumerate() {
            let mut reach = 0.0;
            for s in 0..n {
                reach += b[s] * model.transition(s, a, next);
            }
            *j = reach * model.observation_likelihood(next, a, &sigma);
        }
        let p_sigma: f64 = joint.iter().sum();
        if p_sigma <= 0.0 {
            continue;
        }
        let posterior: Vec<f64> = joint.iter().map(|j| j / p_sigma).collect();
        future += p_sigma * exact_value(model, &posterior, horizon - 1);
    }
    value + model.gamma() * future
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::{build_base_model, RewardSpec, RobotState};

    /// Two states that swap w.p. `1 - stay`; flag 0 is informative.
    fn toy(rewards: [[f64; NUM_ACTIONS]; 2], stay: f64, gamma: f64) -> ApomdpModel {
        let t = vec![
            vec![vec![stay, 1.0 - stay]; NUM_ACTIONS],
            vec![vec![1.0 - stay, stay]; NUM_ACTIONS],
        ];
        let mut o0 = [0.0; NUM_FLAGS];
        o0[0] = 0.8;
        let mut o1 = [0.0; NUM_FLAGS];
        o1[0] = 0.3;
        ApomdpModel::from_tables(
            vec!["x".into(), "y".into()],
            gamma,
            0,
            &[],
            rewards.to_vec(),
            t,
            vec![vec![o0; NUM_ACTIONS], vec![o1; NUM_ACTIONS]],
        )
        .unwrap()
    }

    #[test]
    fn terminal_belief_idles() {
        let m = build_base_model(RewardSpec::default(), 0.95).unwrap();
        let b = Belief::point(11, RobotState::GlobalSuccess.index());
        assert_eq!(plan_action(&m, &b, &SolverConfig::default()), RobotAction::Idle);
    }

    #[test]
    fn depth_one_is_greedy_on_expected_reward() {
        let m = build_base_model(RewardSpec::default(), 0.95).unwrap();
        let b = Belief::new(vec![0.0, 0.0, 0.2, 0.1, 0.1, 0.1, 0.4, 0.1, 0.0, 0.0, 0.0]).unwrap();
        let cfg = SolverConfig { depth: 1, ..SolverConfig::default() };
        let mut best = RobotAction::Idle;
        let mut best_r = f64::NEG_INFINITY;
        for a in RobotAction::ALL {
            let r: f64 = (0..11).map(|s| b.probs()[s] * m.reward(s, a)).sum();
            if r > best_r {
                best_r = r;
                best = a;
            }
        }
        assert_eq!(plan_action(&m, &b, &cfg), best);
    }

    #[test]
    fn enumerated_lookahead_matches_oracle_on_toy() {
        let m = toy(
            [[1.0, 0.0, 0.5, 0.2, 0.1], [-1.0, 0.3, 0.8, 0.0, 0.1]],
            0.7,
            0.9,
        );
        let cfg = SolverConfig { depth: 3, width: 1, seed: 0, enumerate: true, prune: 0.0 };
        for k in 0..=10 {
            let p = k as f64 / 10.0;
            let b = Belief::new(vec![p, 1.0 - p]).unwrap();
            let (a, v) = exact_plan(&m, &b, 3).unwrap();
            let q = q_values(&m, &b, &cfg);
            assert_eq!(plan_action(&m, &b, &cfg), a, "p = {p}");
            assert!((q[a.index()] - v).abs() < 1e-9);
        }
    }

    #[test]
    fn exact_plan_edge_cases() {
        let m = toy([[0.0; NUM_ACTIONS]; 2], 0.5, 0.9);
        let b = Belief::uniform(2);
        assert_eq!(exact_plan(&m, &b, 0).unwrap(), (RobotAction::Idle, 0.0));
        assert!(matches!(exact_plan(&m, &b, 6), Err(Error::SizeGuard { .. })));
        let big = build_base_model(RewardSpec::default(), 0.95).unwrap();
        assert!(exact_plan(&big, &Belief::initial(&big), 2).is_err());
    }

    #[test]
    fn dominant_action_value_is_geometric_sum() {
        // TakeOver pays 1 everywhere, every other action pays 0.
        let mut r = [0.0; NUM_ACTIONS];
        r[RobotAction::TakeOver.index()] = 1.0;
        let gamma = 0.9;
        let m = toy([r, r], 0.6, gamma);
        let b = Belief::new(vec![0.25, 0.75]).unwrap();
        for h in 1..=4 {
            let (a, v) = exact_plan(&m, &b, h).unwrap();
            let expected: f64 = (0..h).map(|t| gamma.powi(t as i32)).sum();
            assert_eq!(a, RobotAction::TakeOver);
            assert!((v - expected).abs() < 1e-12);
        }
        assert_eq!(exact_plan(&m, &b, 3).unwrap(), exact_plan(&m, &b, 3).unwrap());
    }

    #[test]
    fn sampled_planner_is_seed_deterministic_and_bounded() {
        let m = build_base_model(RewardSpec::default(), 0.95).unwrap();
        let b = Belief::new(vec![0.0, 0.0, 0.5, 0.1, 0.2, 0.0, 0.1, 0.1, 0.0, 0.0, 0.0]).unwrap();
        let cfg = SolverConfig { seed: 11, ..SolverConfig::default() };
        assert_eq!(q_values(&m, &b, &cfg), q_values(&m, &b, &cfg));
        let bound = m.max_reward() / (1.0 - m.gamma()) + 1e-6;
        assert!(q_values(&m, &b, &cfg).iter().all(|&q| q <= bound));
    }

    #[test]
    fn config_validation() {
        assert!(SolverConfig { depth: 0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig { width: 0, ..SolverConfig::default() }.validate().is_err());
        assert!(SolverConfig::default().validate().is_ok());
    }
}

use serde::{Deserialize, Serialize};

use super::{ApomdpModel, ObservationVector, RobotAction};
use crate::error::{config, Error, Result};

const SUM_TOLERANCE: f64 = 1e-9;

/// A normalized probability vector over the model's states.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct Belief(Vec<f64>);

impl Belief {
    pub fn new(probs: Vec<f64>) -> Result<Self> {
        if probs.is_empty() {
            return Err(config("empty belief"));
        }
        if probs.iter().any(|&p| !(p >= 0.0) || !p.is_finite()) {
            return Err(config("belief has a negative or non-finite entry"));
        }
        let sum: f64 = probs.iter().sum();
        if (sum - 1.0).abs() > SUM_TOLERANCE {
            return Err(config(format!("belief sums to {sum}")));
        }
        Ok(Self(probs))
    }

    /// Normalizes non-negative weights; `None` when they sum to zero.
    pub fn from_weights(mut weights: Vec<f64>) -> Option<Self> {
        let sum: f64 = weights.iter().sum();
        if !(sum > 0.0) || !sum.is_finite() {
            return None;
        }
        weights.iter_mut().for_each(|w| *w /= sum);
        Some(Self(weights))
    }

    pub fn point(n: usize, s: usize) -> Self {
        let mut probs = vec![0.0; n];
        probs[s] = 1.0;
        Self(probs)
    }

    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    /// The belief a fresh task starts from.
    pub fn initial(model: &ApomdpModel) -> Self {
        Self::point(model.num_states(), model.initial_state())
    }

    pub fn probs(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn terminal_mass(&self, model: &ApomdpModel) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|&(s, _)| model.is_terminal(s))
            .map(|(_, p)| p)
            .sum()
    }

    /// Index of the most likely state (lowest index on ties).
    pub fn argmax(&self) -> usize {
        self.0
            .iter()
            .enumerate()
            .fold((0, f64::NEG_INFINITY), |best, (i, &p)| if p > best.1 { (i, p) } else { best })
            .0
    }

    /// Expected immediate reward Σ_s b(s) R(s, a).
    pub fn expected_reward(&self, model: &ApomdpModel, a: RobotAction) -> f64 {
        self.0
            .iter()
            .enumerate()
            .filter(|&(_, &p)| p > 0.0)
            .map(|(s, &p)| p * model.reward(s, a))
            .sum()
    }

    /// Σ_s T(s' | s, a) b(s) for every s'.
    pub fn predict(&self, model: &ApomdpModel, a: RobotAction) -> Vec<f64> {
        let n = model.num_states();
        let mut out = vec![0.0; n];
        for (s, &p) in self.0.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (o, &t) in out.iter_mut().zip(model.transition_row(s, a)) {
                *o += p * t;
            }
        }
        out
    }
}

/// Bayes filter step: b'(s') ∝ O(σ | s', a) Σ_s T(s' | s, a) b(s).
pub fn belief_update(
    model: &ApomdpModel,
    belief: &Belief,
    action: RobotAction,
    sigma: &ObservationVector,
) -> Result<Belief> {
    if belief.len() != model.num_states() {
        return Err(config("belief length does not match the model"));
    }
    let mut weights = belief.predict(model, action);
    for (next, w) in weights.iter_mut().enumerate() {
        if *w > 0.0 {
            *w *= model.observation_likelihood(next, action, sigma);
        }
    }
    Belief::from_weights(weights).ok_or(Error::ImpossibleObservation)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::{build_base_model, Flag, RewardSpec, RobotState, NUM_ACTIONS, NUM_FLAGS};
    use proptest::prelude::*;

    /// Two states, each action keeps the state w.p. `stay`; flag 0 fires
    /// with rate `hit` in state 0 and `miss` in state 1; all other flags are
    /// never set.
    fn toy(stay: f64, hit: f64, miss: f64) -> ApomdpModel {
        let t = vec![
            vec![vec![stay, 1.0 - stay]; NUM_ACTIONS],
            vec![vec![1.0 - stay, stay]; NUM_ACTIONS],
        ];
        let mut o0 = [0.0; NUM_FLAGS];
        o0[0] = hit;
        let mut o1 = [0.0; NUM_FLAGS];
        o1[0] = miss;
        ApomdpModel::from_tables(
            vec!["a".into(), "b".into()],
            0.9,
            0,
            &[],
            vec![[0.0; NUM_ACTIONS]; 2],
            t,
            vec![vec![o0; NUM_ACTIONS], vec![o1; NUM_ACTIONS]],
        )
        .unwrap()
    }

    #[test]
    fn uninformative_update_keeps_uniform() {
        let m = toy(0.5, 0.5, 0.5);
        let b = Belief::uniform(2);
        let sigma = ObservationVector::from_flags(&[Flag::HumanDetected]);
        let post = belief_update(&m, &b, RobotAction::Idle, &sigma).unwrap();
        assert!((post.probs()[0] - 0.5).abs() < 1e-12);
    }

    #[test]
    fn two_state_posterior_matches_hand_computation() {
        // prior (0.3, 0.7); stay 0.8 → predicted (0.38, 0.62);
        // flag 0 set: likelihoods 0.9 and 0.2 → (0.342, 0.124) / 0.466
        let m = toy(0.8, 0.9, 0.2);
        let b = Belief::new(vec![0.3, 0.7]).unwrap();
        let sigma = ObservationVector::from_flags(&[Flag::HumanDetected]);
        let post = belief_update(&m, &b, RobotAction::Plan, &sigma).unwrap();
        assert!((post.probs()[0] - 0.342 / 0.466).abs() < 1e-12);
        assert!((post.probs()[1] - 0.124 / 0.466).abs() < 1e-12);
    }

    #[test]
    fn zero_likelihood_is_an_error() {
        let m = toy(0.8, 0.9, 0.2);
        let b = Belief::uniform(2);
        let sigma = ObservationVector::from_flags(&[Flag::LookingAround]);
        assert!(matches!(
            belief_update(&m, &b, RobotAction::Idle, &sigma),
            Err(Error::ImpossibleObservation)
        ));
    }

    #[test]
    fn terminal_belief_is_absorbing() {
        let m = build_base_model(RewardSpec::default(), 0.95).unwrap();
        let gs = RobotState::GlobalSuccess.index();
        let b = Belief::point(11, gs);
        let sigma = ObservationVector::from_flags(&[Flag::HumanDetected, Flag::TaskSuccess]);
        for a in RobotAction::ALL {
            let post = belief_update(&m, &b, a, &sigma).unwrap();
            assert_eq!(post, b);
        }
    }

    #[test]
    fn rejects_unnormalized_beliefs() {
        assert!(Belief::new(vec![0.5, 0.6]).is_err());
        assert!(Belief::new(vec![-0.1, 1.1]).is_err());
        assert!(Belief::new(vec![]).is_err());
    }

    proptest! {
        #[test]
        fn updates_stay_normalized(
            weights in proptest::collection::vec(0.0f64..1.0, 11),
            bits in 0u16..512,
            action in 0usize..5,
        ) {
            let m = build_base_model(RewardSpec::default(), 0.95).unwrap();
            prop_assume!(weights.iter().sum::<f64>() > 1e-6);
            let b = Belief::from_weights(weights).unwrap();
            let sigma = ObservationVector::from_bits(bits);
            if let Ok(post) = belief_update(&m, &b, RobotAction::ALL[action], &sigma) {
                let sum: f64 = post.probs().iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-9);
                prop_assert!(post.probs().iter().all(|&p| p >= 0.0));
            }
        }
    }
}

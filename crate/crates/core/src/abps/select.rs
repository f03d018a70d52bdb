use serde::{Deserialize, Serialize};

use super::{ObservationModel, PerformanceModel, PolicyId};
use crate::apomdp::ObservationVector;
use crate::error::{config, Result};

/// Belief over the human-type space.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct TypeBelief(Vec<f64>);

impl TypeBelief {
    pub fn uniform(n: usize) -> Self {
        Self(vec![1.0 / n as f64; n])
    }

    pub fn new(probs: Vec<f64>) -> Result<Self> {
        let sum: f64 = probs.iter().sum();
        if probs.is_empty() || probs.iter().any(|p| !(*p >= 0.0)) || (sum - 1.0).abs() > 1e-9 {
            return Err(config("type belief must be a probability vector"));
        }
        Ok(Self(probs))
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

    /// Most likely type index, lowest index on ties.
    pub fn argmax(&self) -> usize {
        let mut best = 0;
        for (i, &p) in self.0.iter().enumerate() {
            if p > self.0[best] {
                best = i;
            }
        }
        best
    }
}

/// Posterior over types after one task under `policy`:
/// β'(τ) ∝ P(seq | τ, π) β(τ), evaluated in log space.
pub fn update_type_belief(
    belief: &TypeBelief,
    obs: &ObservationModel,
    policy: PolicyId,
    seq: &[ObservationVector],
) -> Result<TypeBelief> {
    if belief.len() != obs.types().len() {
        return Err(config("type belief and observation model disagree on the type space"));
    }
    if seq.is_empty() {
        return Ok(belief.clone());
    }
    let mut log_post = Vec::with_capacity(belief.len());
    for (t, &b) in belief.probs().iter().enumerate() {
        log_post.push(if b > 0.0 { b.ln() + obs.log_likelihood(t, policy, seq)? } else { f64::NEG_INFINITY });
    }
    let top = log_post.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let weights: Vec<f64> = log_post.iter().map(|&l| (l - top).exp()).collect();
    let sum: f64 = weights.iter().sum();
    Ok(TypeBelief(weights.into_iter().map(|w| w / sum).collect()))
}

fn check(perf: &PerformanceModel, belief: &TypeBelief) -> Result<()> {
    if belief.len() != perf.types().len() {
        return Err(config("type belief and performance model disagree on the type space"));
    }
    Ok(())
}

/// Policy ids in ascending order, so that strict improvement keeps the
/// lowest id on ties.
fn ordered(perf: &PerformanceModel) -> Vec<PolicyId> {
    let mut ids = perf.policies().to_vec();
    ids.sort_unstable();
    ids
}

fn argmax_policy(perf: &PerformanceModel, mut score: impl FnMut(PolicyId) -> Result<f64>) -> Result<(PolicyId, f64)> {
    let mut best: Option<(PolicyId, f64)> = None;
    for p in ordered(perf) {
        let s = score(p)?;
        if best.map_or(true, |(_, b)| s > b) {
            best = Some((p, s));
        }
    }
    Ok(best.expect("performance model has at least one policy"))
}

fn belief_expected(perf: &PerformanceModel, belief: &TypeBelief, policy: PolicyId) -> Result<f64> {
    let mut sum = 0.0;
    for (t, &b) in belief.probs().iter().enumerate() {
        sum += b * perf.expected(t, policy)?;
    }
    Ok(sum)
}

/// Best belief-weighted expected utility over the library.
pub fn u_beta(perf: &PerformanceModel, belief: &TypeBelief) -> Result<f64> {
    check(perf, belief)?;
    Ok(argmax_policy(perf, |p| belief_expected(perf, belief, p))?.1)
}

/// Expected-improvement selection: the policy with the largest
/// belief-weighted probability of beating `u_beta`.
pub fn select_policy_ei(perf: &PerformanceModel, belief: &TypeBelief) -> Result<PolicyId> {
    let target = u_beta(perf, belief)?;
    let (p, _) = argmax_policy(perf, |p| {
        let mut sum = 0.0;
        for (t, &b) in belief.probs().iter().enumerate() {
            sum += b * (1.0 - perf.cdf(t, p, target)?);
        }
        Ok(sum)
    })?;
    Ok(p)
}

/// Probability-of-improvement selection: the policy with the most
/// belief-weighted mass in the bin of `u_plus`.
pub fn select_policy_pi(perf: &PerformanceModel, belief: &TypeBelief, u_plus: f64) -> Result<PolicyId> {
    check(perf, belief)?;
    let bin = perf.bin_of(u_plus);
    let (p, _) = argmax_policy(perf, |p| {
        let mut sum = 0.0;
        for (t, &b) in belief.probs().iter().enumerate() {
            sum += b * perf.masses(t, p)?[bin];
        }
        Ok(sum)
    })?;
    Ok(p)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RegretRecord {
    pub task_id: usize,
    pub utility: f64,
    pub reference: f64,
    pub regret: f64,
}

/// Regret against the mean over types of the best expected utility in the
/// library; negative when the task beat that reference.
pub fn task_regret(task_id: usize, utility: f64, perf: &PerformanceModel) -> Result<RegretRecord> {
    let n = perf.types().len();
    let mut reference = 0.0;
    for t in 0..n {
        let mut best = f64::NEG_INFINITY;
        for &p in perf.policies() {
            best = best.max(perf.expected(t, p)?);
        }
        reference += best;
    }
    reference /= n as f64;
    Ok(RegretRecord { task_id, utility, reference, regret: reference - utility })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::Flag;
    use crate::human::{make_type_space, HumanType};

    fn types(n: usize) -> Vec<HumanType> {
        make_type_space()[..n].to_vec()
    }

    /// One type, policies with all their mass in a single bin of [0, 4).
    fn point_model(bins_by_policy: &[usize]) -> PerformanceModel {
        let masses = bins_by_policy
            .iter()
            .map(|&k| {
                let mut m = vec![0.0; 4];
                m[k] = 1.0;
                m
            })
            .collect();
        let ids = (0..bins_by_policy.len()).collect();
        PerformanceModel::from_histograms(types(1), ids, vec![0.0, 1.0, 2.0, 3.0, 4.0], masses).unwrap()
    }

    #[test]
    fn uninformative_observations_leave_the_belief_alone() {
        let obs = ObservationModel::new(types(3), vec![0]).unwrap();
        let b = TypeBelief::uniform(3);
        let seq = vec![ObservationVector::from_flags(&[Flag::Idle]); 5];
        let post = update_type_belief(&b, &obs, 0, &seq).unwrap();
        for (x, y) in post.probs().iter().zip(b.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(update_type_belief(&b, &obs, 0, &[]).unwrap(), b);
    }

    #[test]
    fn posterior_odds_follow_the_bernoulli_product() {
        // Rates 0.9 vs 0.1 on the first flag; every other flag is identical.
        let mut obs = ObservationModel::new(types(2), vec![0]).unwrap();
        let on = ObservationVector::from_flags(&[Flag::HumanDetected]);
        let off = ObservationVector::default();
        for i in 0..8 {
            obs.record(0, 0, if i < 7 { &on } else { &off }).unwrap();
            obs.record(1, 0, if i < 1 { &on } else { &off }).unwrap();
        }
        // Smoothed: (7+1)/10 = 0.8 and (1+1)/10 = 0.2 for flag 0; the rest
        // are 1/10 for both types.
        let post = update_type_belief(&TypeBelief::uniform(2), &obs, 0, &vec![on; 10]).unwrap();
        let odds = post.probs()[0] / post.probs()[1];
        assert!((odds / 4f64.powi(10) - 1.0).abs() < 1e-9);
    }

    #[test]
    fn order_of_observations_does_not_matter() {
        let mut obs = ObservationModel::new(types(2), vec![0]).unwrap();
        obs.record(0, 0, &ObservationVector::from_flags(&[Flag::Idle])).unwrap();
        let a = ObservationVector::from_flags(&[Flag::Idle]);
        let b = ObservationVector::from_flags(&[Flag::LookingAround]);
        let p1 = update_type_belief(&TypeBelief::uniform(2), &obs, 0, &[a, b, b]).unwrap();
        let p2 = update_type_belief(&TypeBelief::uniform(2), &obs, 0, &[b, a, b]).unwrap();
        for (x, y) in p1.probs().iter().zip(p2.probs()) {
            assert!((x - y).abs() < 1e-12);
        }
    }

    #[test]
    fn u_beta_is_the_best_expectation() {
        let p = point_model(&[1]);
        assert_eq!(u_beta(&p, &TypeBelief::uniform(1)).unwrap(), 1.5);
        let p = point_model(&[2, 3, 0]);
        assert_eq!(u_beta(&p, &TypeBelief::uniform(1)).unwrap(), 3.5);
        assert!(u_beta(&p, &TypeBelief::uniform(2)).is_err());
    }

    #[test]
    fn ei_prefers_upside_and_breaks_ties_low() {
        let single = point_model(&[2]);
        assert_eq!(select_policy_ei(&single, &TypeBelief::uniform(1)).unwrap(), 0);
        let same = point_model(&[1, 1, 1]);
        assert_eq!(select_policy_ei(&same, &TypeBelief::uniform(1)).unwrap(), 0);

        // A's single bin contains Uβ, so interpolation puts half of A above
        // it, which beats B's 30%; with 80% above, B wins.
        let edges = vec![0.0, 1.0, 2.0, 3.0];
        let a = vec![0.0, 1.0, 0.0];
        let b = vec![0.7, 0.0, 0.3];
        let p = PerformanceModel::from_histograms(types(1), vec![0, 1], edges, vec![a, b]).unwrap();
        // Uβ = 1.5 from A; F_A(1.5) = 0.5, F_B(1.5) = 0.7.
        assert_eq!(u_beta(&p, &TypeBelief::uniform(1)).unwrap(), 1.5);
        assert_eq!(select_policy_ei(&p, &TypeBelief::uniform(1)).unwrap(), 0);
        let b2 = vec![0.2, 0.0, 0.8];
        let edges = vec![0.0, 1.0, 2.0, 3.0];
        let p = PerformanceModel::from_histograms(types(1), vec![0, 1], edges, vec![vec![0.0, 1.0, 0.0], b2]).unwrap();
        assert_eq!(select_policy_ei(&p, &TypeBelief::uniform(1)).unwrap(), 1);
    }

    #[test]
    fn pi_looks_up_the_target_bin() {
        let p = point_model(&[0, 2]);
        let b = TypeBelief::uniform(1);
        assert_eq!(select_policy_pi(&p, &b, 2.5).unwrap(), 1);
        assert_eq!(select_policy_pi(&p, &b, 0.5).unwrap(), 0);
        assert_eq!(select_policy_pi(&p, &b, -9.0).unwrap(), 0);
        assert_eq!(select_policy_pi(&point_model(&[3, 3]), &b, 3.5).unwrap(), 0);
        assert_eq!(select_policy_pi(&point_model(&[1]), &b, 3.5).unwrap(), 0);
    }

    #[test]
    fn regret_reference_is_the_mean_of_per_type_maxima() {
        let edges = vec![0.0, 2.0, 4.0];
        // Expected values: τ0 → (1, 3), τ1 → (3, 1).
        let lo = vec![1.0, 0.0];
        let hi = vec![0.0, 1.0];
        let p = PerformanceModel::from_histograms(types(2), vec![0, 1], edges, vec![lo.clone(), hi.clone(), hi, lo])
            .unwrap();
        let r = task_regret(4, 3.0, &p).unwrap();
        assert_eq!(r.reference, 3.0);
        assert_eq!(r.regret, 0.0);
        assert!(task_regret(5, 3.5, &p).unwrap().regret < 0.0);
    }
}

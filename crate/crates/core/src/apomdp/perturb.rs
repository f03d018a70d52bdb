use rand::Rng;

use super::{ApomdpModel, NUM_ACTIONS};
use crate::error::{config, Result};
use crate::seed;

fn factor<R: Rng>(rng: &mut R, magnitude: f64) -> f64 {
    rng.gen_range(1.0 - magnitude..=1.0 + magnitude).max(f64::MIN_POSITIVE)
}

/// Scales every nonzero T entry and every Bernoulli pair (p, 1-p) of O by
/// independent factors from U(1-m, 1+m) and renormalizes. Zeros stay zero,
/// so the connection scheme of `base` survives; R and γ are untouched.
pub fn perturb_model(base: &ApomdpModel, magnitude: f64, seed: u64) -> Result<ApomdpModel> {
    if !(magnitude > 0.0 && magnitude <= 1.0) {
        return Err(config(format!("perturbation magnitude {magnitude} outside (0, 1]")));
    }
    let mut rng = seed::rng(seed, &[0x7065_7274]);
    let mut out = base.clone();
    let n = base.num_states();

    for (row_idx, row) in out.transitions_mut().chunks_mut(n).enumerate() {
        if base.is_terminal(row_idx / NUM_ACTIONS) {
            continue;
        }
        for p in row.iter_mut().filter(|p| **p > 0.0) {
            *p *= factor(&mut rng, magnitude);
        }
        let sum: f64 = row.iter().sum();
        row.iter_mut().for_each(|p| *p /= sum);
    }

    for p in out.observations_mut() {
        if *p > 0.0 && *p < 1.0 {
            let on = *p * factor(&mut rng, magnitude);
            let off = (1.0 - *p) * factor(&mut rng, magnitude);
            *p = on / (on + off);
        }
    }

    out.validate()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::apomdp::{build_base_model, RewardSpec, RobotAction};

    fn base() -> ApomdpModel {
        build_base_model(RewardSpec::default(), 0.95).unwrap()
    }

    #[test]
    fn tiny_magnitude_is_identity() {
        let b = base();
        let p = perturb_model(&b, 1e-12, 3).unwrap();
        for (x, y) in b.raw_transitions().iter().zip(p.raw_transitions()) {
            assert!((x - y).abs() < 1e-9);
        }
        for (x, y) in b.raw_observations().iter().zip(p.raw_observations()) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn deterministic_per_seed() {
        let b = base();
        let p1 = perturb_model(&b, 0.5, 7).unwrap();
        let p2 = perturb_model(&b, 0.5, 7).unwrap();
        assert_eq!(
            serde_json::to_string(&p1).unwrap(),
            serde_json::to_string(&p2).unwrap()
        );
        assert_ne!(p1, perturb_model(&b, 0.5, 8).unwrap());
    }

    #[test]
    fn structure_and_closure_survive() {
        let b = base();
        let p = perturb_model(&b, 0.5, 7).unwrap();
        let n = b.num_states();
        for s in 0..n {
            for a in RobotAction::ALL {
                let sum: f64 = p.transition_row(s, a).iter().sum();
                assert!((sum - 1.0).abs() < 1e-9);
                for (x, y) in b.transition_row(s, a).iter().zip(p.transition_row(s, a)) {
                    assert_eq!(*x == 0.0, *y == 0.0);
                }
                for (x, y) in b.flag_rates(s, a).iter().zip(p.flag_rates(s, a)) {
                    assert_eq!(*x == 0.0, *y == 0.0);
                    assert_eq!(*x == 1.0, *y == 1.0);
                }
                assert_eq!(b.reward(s, a), p.reward(s, a));
            }
        }
        assert_eq!(b.gamma(), p.gamma());
    }

    #[test]
    fn magnitude_is_checked() {
        let b = base();
        assert!(perturb_model(&b, 0.0, 1).is_err());
        assert!(perturb_model(&b, 1.5, 1).is_err());
        assert!(perturb_model(&b, 1.0, 1).is_ok());
    }
}

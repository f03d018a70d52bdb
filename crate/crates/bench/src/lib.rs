//! Fixtures shared by the benchmarks.

use cobot::abps::{PerformanceModel, TypeBelief};
use cobot::apomdp::{build_base_model, ApomdpModel, Belief, RewardSpec, DEFAULT_GAMMA};
use cobot::human::make_type_space;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn base_model() -> ApomdpModel {
    build_base_model(RewardSpec::default(), DEFAULT_GAMMA).expect("default model is valid")
}

/// A belief spread over the non-terminal states.
pub fn spread_belief(model: &ApomdpModel) -> Belief {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let mut p: Vec<f64> = (0..model.num_states()).map(|s| if model.is_terminal(s) { 0.0 } else { rng.gen() }).collect();
    let sum: f64 = p.iter().sum();
    p.iter_mut().for_each(|x| *x /= sum);
    Belief::new(p).expect("normalized")
}

/// Random histograms for 16 types and `policies` policies, with a random
/// type belief.
pub fn selection_instance(policies: usize, bins: usize) -> (PerformanceModel, TypeBelief) {
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    let types = make_type_space();
    let returns: Vec<Vec<f64>> =
        (0..types.len() * policies).map(|_| (0..20).map(|_| rng.gen_range(-5.0..10.0)).collect()).collect();
    let perf = PerformanceModel::fit(types.clone(), (0..policies).collect(), &returns, bins).expect("valid instance");
    let mut b: Vec<f64> = (0..types.len()).map(|_| rng.gen::<f64>()).collect();
    let sum: f64 = b.iter().sum();
    b.iter_mut().for_each(|x| *x /= sum);
    (perf, TypeBelief::new(b).expect("normalized"))
}

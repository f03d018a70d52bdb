//! Property tests for the invariants every module promises.

use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use cobot::abps::{
    generate_library, update_type_belief, ObservationModel, PerformanceModel, PolicyLibrary, TrainedModels,
    TypeBelief,
};
use cobot::apomdp::{
    belief_update, build_base_model, make_reactive_policy, perturb_model, ApomdpModel, Belief, ObservationVector,
    RewardSpec, RobotAction, RobotState, DEFAULT_GAMMA, NUM_ACTIONS, NUM_FLAGS,
};
use cobot::env::{run_episode, Controller, EpisodeSettings, Participant, TaskConfig, TriggerEvent};
use cobot::experiment::{run_long_term_with, ExperimentConfig, Selector};
use cobot::human::{build_human_model, make_type_space, HumanAction, HumanState, HumanType, InteractionCounters, RobotContext};
use cobot::metrics::compute_metrics;
use cobot::solver::{q_values, SolverConfig};
use cobot::trainer::{estimate_tables, prune_library, AnnotatedStep, TV_CLUSTER_THRESHOLD};

fn base() -> ApomdpModel {
    build_base_model(RewardSpec::default(), DEFAULT_GAMMA).unwrap()
}

fn cases(n: u32) -> Config {
    Config { cases: n, rng_seed: RngSeed::Fixed(0x636f_626f), failure_persistence: None, ..Config::default() }
}

fn normalized(mut v: Vec<f64>) -> Vec<f64> {
    let s: f64 = v.iter().sum();
    v.iter_mut().for_each(|x| *x /= s);
    v
}

fn sample(rng: &mut ChaCha8Rng, p: &[f64]) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, &x) in p.iter().enumerate() {
        acc += x;
        if u < acc {
            return i;
        }
    }
    p.iter().rposition(|&x| x > 0.0).unwrap()
}

fn sample_flags(rng: &mut ChaCha8Rng, rates: &[f64]) -> ObservationVector {
    let mut f = [false; NUM_FLAGS];
    for (x, &p) in f.iter_mut().zip(rates) {
        *x = rng.gen::<f64>() < p;
    }
    ObservationVector::new(f)
}

fn any_type() -> impl Strategy<Value = HumanType> {
    (0..16usize).prop_map(|i| HumanType::from_index(i).unwrap())
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn perturbation_chains_stay_closed(steps in prop::collection::vec((1e-6f64..=1.0, any::<u64>()), 1..5)) {
        let b = base();
        let mut m = b.clone();
        for (mag, s) in steps {
            m = perturb_model(&m, mag, s).unwrap();
        }
        for s in 0..m.num_states() {
            for a in RobotAction::ALL {
                let row = m.transition_row(s, a);
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                for (p, q) in row.iter().zip(b.transition_row(s, a)) {
                    prop_assert!(*p >= 0.0);
                    prop_assert_eq!(*p == 0.0, *q == 0.0);
                }
                for (p, q) in m.flag_rates(s, a).iter().zip(b.flag_rates(s, a)) {
                    prop_assert!((0.0..=1.0).contains(p));
                    prop_assert_eq!(*p == 0.0, *q == 0.0);
                    prop_assert_eq!(*p == 1.0, *q == 1.0);
                }
            }
        }
    }

    #[test]
    fn belief_updates_stay_normalized(seed in any::<u64>(), mag in 0.01f64..=1.0) {
        let m = perturb_model(&base(), mag, seed).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let probs = normalized((0..m.num_states()).map(|_| rng.gen::<f64>()).collect());
        let a = RobotAction::ALL[rng.gen_range(0..NUM_ACTIONS)];
        let s = sample(&mut rng, &probs);
        let next = sample(&mut rng, m.transition_row(s, a));
        let sigma = sample_flags(&mut rng, m.flag_rates(next, a));
        let b = belief_update(&m, &Belief::new(probs).unwrap(), a, &sigma).unwrap();
        prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(b.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn terminal_mass_is_absorbing(split in 0.0f64..=1.0, seed in any::<u64>()) {
        let m = base();
        let mut probs = vec![0.0; m.num_states()];
        probs[RobotState::GlobalSuccess.index()] = split;
        probs[RobotState::GlobalFail.index()] = 1.0 - split;
        let b = Belief::new(probs.clone()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let a = RobotAction::ALL[rng.gen_range(0..NUM_ACTIONS)];
        let s = sample(&mut rng, &probs);
        let sigma = sample_flags(&mut rng, m.flag_rates(s, a));
        let next = belief_update(&m, &b, a, &sigma).unwrap();
        prop_assert!((next.terminal_mass(&m) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn reactive_policy_is_a_pure_function(timeout in 1u32..30, bits in 0u16..512, elapsed in 0u32..60) {
        let sigma = ObservationVector::from_bits(bits);
        let p = make_reactive_policy(timeout).unwrap();
        let q = make_reactive_policy(timeout).unwrap();
        prop_assert_eq!(p.action(&sigma, elapsed), p.action(&sigma, elapsed));
        prop_assert_eq!(p.action(&sigma, elapsed), q.action(&sigma, elapsed));
    }

    #[test]
    fn root_values_are_bounded_and_seeded(seed in any::<u64>(), depth in 1usize..4, width in 1usize..6) {
        let m = base();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let b = Belief::new(normalized((0..m.num_states()).map(|_| rng.gen::<f64>()).collect())).unwrap();
        let cfg = SolverConfig { depth, width, seed, enumerate: false, prune: 0.0 };
        let q = q_values(&m, &b, &cfg);
        let bound = m.max_reward() / (1.0 - m.gamma()) + 1e-6;
        prop_assert!(q.iter().all(|&v| v <= bound));
        prop_assert_eq!(q, q_values(&m, &b, &cfg));
    }

    #[test]
    fn human_rows_are_normalized_and_monotone(t in any_type(), seed in any::<u64>(), n in 0u32..80, k in 0u32..80) {
        let m = build_human_model(t, seed);
        let at = |interferences, tasks| InteractionCounters { interferences, tasks };
        for s in HumanState::ALL.into_iter().filter(|s| !s.is_terminal()) {
            for ctx in RobotContext::ALL {
                let row = m.effective_row(s, ctx, at(n, k));
                prop_assert!((row.iter().sum::<f64>() - 1.0).abs() < 1e-9);
                prop_assert!(row.iter().all(|&p| p >= 0.0));
                let tired = HumanState::Tired.index();
                prop_assert!(m.effective_row(s, ctx, at(n, k + 1))[tired] >= row[tired] - 1e-15);
            }
            let warn = HumanState::WarnTheRobot.index();
            let now = m.effective_row(s, RobotContext::Interfere, at(n, k))[warn];
            prop_assert!(m.effective_row(s, RobotContext::Interfere, at(n + 1, k))[warn] >= now - 1e-15);
        }
    }
}

proptest! {
    #![proptest_config(cases(24))]

    #[test]
    fn episodes_conserve_counts_and_expose_warnings(t in any_type(), seed in any::<u64>(), which in 0usize..4) {
        let settings = EpisodeSettings::for_task(TaskConfig::of_type(1 + (seed % 5) as u8));
        let mut controller = match which {
            0 => Controller::proactive(base(), SolverConfig { depth: 1, ..SolverConfig::default() }),
            1 => Controller::Reactive(make_reactive_policy(8).unwrap()),
            2 => Controller::Idle,
            _ => Controller::Random,
        };
        let mut p = Participant::new(build_human_model(t, seed));
        let log = run_episode(&settings, &mut p, &mut controller, seed).unwrap();
        let s = log.summary.as_ref().unwrap();
        prop_assert_eq!(s.n_s + s.n_f, settings.task.num_subtasks);
        prop_assert_eq!(s.n_s, s.n_s_human + s.n_s_robot);
        prop_assert_eq!(s.n_f, s.n_f_human + s.n_f_robot);
        let mut last_decision = 0;
        for r in &log.records {
            if r.human_action == HumanAction::Warn {
                prop_assert!(r.sigma.get(cobot::apomdp::Flag::WarnsRobot));
                prop_assert!(r.events.contains(&TriggerEvent::WarningInterrupt));
            }
            if r.decision {
                prop_assert!(r.tick - last_decision <= 3);
                last_decision = r.tick;
            }
        }
        let row = compute_metrics(&log, 0).unwrap();
        prop_assert!(row.eta_task <= row.s_task + 1e-12);
        prop_assert!(row.eta_task <= row.c_human + 1e-12);
        prop_assert!((row.eta_task - row.s_task * row.c_human).abs() < 1e-12);
    }
}

fn observation_model(rates: &[Vec<f64>], per_type: u64) -> ObservationModel {
    let types = make_type_space()[..rates.len()].to_vec();
    let mut obs = ObservationModel::new(types, vec![0]).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(per_type);
    for (t, r) in rates.iter().enumerate() {
        for _ in 0..per_type {
            obs.record(t, 0, &sample_flags(&mut rng, r)).unwrap();
        }
    }
    obs
}

proptest! {
    #![proptest_config(cases(64))]

    #[test]
    fn type_belief_updates_stay_normalized(
        rates in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, NUM_FLAGS), 2..6),
        seq in prop::collection::vec(0u16..512, 0..40),
        prior in prop::collection::vec(0.0f64..1.0, 6),
    ) {
        let obs = observation_model(&rates, 30);
        let n = rates.len();
        let prior = normalized(prior[..n].iter().map(|p| p + 1e-3).collect());
        let seq: Vec<_> = seq.into_iter().map(ObservationVector::from_bits).collect();
        let b = update_type_belief(&TypeBelief::new(prior).unwrap(), &obs, 0, &seq).unwrap();
        prop_assert!((b.probs().iter().sum::<f64>() - 1.0).abs() < 1e-9);
        prop_assert!(b.probs().iter().all(|&p| p >= 0.0));
    }

    #[test]
    fn matching_observations_never_lower_the_matching_type(
        rates in prop::collection::vec(prop::collection::vec(0.0f64..=1.0, NUM_FLAGS), 2..6),
        seq in prop::collection::vec(0u16..512, 0..20),
        extra in 0u16..512,
        target in 0usize..6,
    ) {
        let obs = observation_model(&rates, 30);
        let target = target % rates.len();
        let sigma = ObservationVector::from_bits(extra);
        let lik = |t: usize| obs.log_likelihood(t, 0, &[sigma]).unwrap();
        // Only observations that τ* explains at least as well as any type match it.
        prop_assume!((0..rates.len()).all(|t| lik(target) >= lik(t)));
        let seq: Vec<_> = seq.into_iter().map(ObservationVector::from_bits).collect();
        let mut longer = seq.clone();
        longer.push(sigma);
        let uniform = TypeBelief::uniform(rates.len());
        let before = update_type_belief(&uniform, &obs, 0, &seq).unwrap().probs()[target];
        let after = update_type_belief(&uniform, &obs, 0, &longer).unwrap().probs()[target];
        prop_assert!(after >= before - 1e-12);
    }

    #[test]
    fn estimates_converge_at_a_thousand_samples(seed in any::<u64>()) {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let n = 2;
        let stay = rng.gen_range(0.1..0.9);
        let t = [[stay, 1.0 - stay], [1.0 - stay, stay]];
        let rates: Vec<Vec<f64>> = (0..n).map(|_| (0..NUM_FLAGS).map(|_| rng.gen_range(0.05..0.95)).collect()).collect();
        let mut steps = Vec::new();
        for s in 0..n {
            for _ in 0..1000 {
                let next = sample(&mut rng, &t[s]);
                steps.push(AnnotatedStep { state: s, action: 0, next, sigma: sample_flags(&mut rng, &rates[next]) });
            }
        }
        let est = estimate_tables(&steps, n, 1).unwrap();
        for s in 0..n {
            for (x, y) in est.transition_row(s, 0).iter().zip(&t[s]) {
                prop_assert!((x - y).abs() <= 0.05, "T {} vs {}", x, y);
            }
            for (x, y) in est.flag_rates(s, 0).iter().zip(&rates[s]) {
                prop_assert!((x - y).abs() <= 0.05, "O {} vs {}", x, y);
            }
        }
    }
}

fn total_variation(a: &[f64], b: &[f64]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

proptest! {
    #![proptest_config(cases(48))]

    #[test]
    fn pruning_keeps_a_member_of_every_cluster(
        hists in prop::collection::vec(prop::collection::vec(0.0f64..1.0, 4), 2..9),
        keep_frac in 0.0f64..=1.0,
    ) {
        let n = hists.len();
        let masses: Vec<Vec<f64>> = hists.iter().map(|h| normalized(h.iter().map(|x| x + 0.05).collect())).collect();
        let types = make_type_space()[..1].to_vec();
        let perf = PerformanceModel::from_histograms(types, (0..n).collect(), vec![0.0, 1.0, 2.0, 3.0, 4.0], masses.clone()).unwrap();
        let lib = generate_library(&base(), n, &[0.1], 3).unwrap();

        // Survivors of the quartile cut, then single-linkage clusters.
        let keep = 1 + ((n - 1) as f64 * keep_frac) as usize;
        let mean = |p: usize| perf.expected(0, p).unwrap();
        let mut ranked: Vec<usize> = (0..n).collect();
        ranked.sort_by(|&a, &b| mean(b).partial_cmp(&mean(a)).unwrap().then(a.cmp(&b)));
        let pool = &ranked[..n - (n / 4).min(n - keep)];
        let mut cluster: Vec<usize> = (0..pool.len()).collect();
        for i in 0..pool.len() {
            for j in 0..pool.len() {
                if total_variation(&masses[pool[i]], &masses[pool[j]]) < TV_CLUSTER_THRESHOLD {
                    let (a, b) = (cluster[i], cluster[j]);
                    cluster.iter_mut().filter(|c| **c == b).for_each(|c| *c = a);
                }
            }
        }
        let mut labels = cluster.clone();
        labels.sort_unstable();
        labels.dedup();

        let kept = prune_library(&lib, &perf, keep).unwrap().ids();
        prop_assert_eq!(kept.len(), keep);
        if keep >= labels.len() {
            for l in labels {
                prop_assert!(pool.iter().zip(&cluster).any(|(p, c)| *c == l && kept.contains(p)));
            }
        }
    }
}

/// A library of identical copies of the base model with random trained
/// models: enough to exercise the selection loop quickly.
fn synthetic_long_term(policies: usize, seed: u64) -> (PolicyLibrary, TrainedModels) {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let types = make_type_space();
    let ids: Vec<usize> = (0..policies).collect();
    let lib = generate_library(&base(), policies, &[0.2], seed).unwrap();
    let mut obs = ObservationModel::new(types.clone(), ids.clone()).unwrap();
    for t in 0..types.len() {
        for &p in &ids {
            let rates: Vec<f64> = (0..NUM_FLAGS).map(|_| rng.gen()).collect();
            for _ in 0..20 {
                obs.record(t, p, &sample_flags(&mut rng, &rates)).unwrap();
            }
        }
    }
    let masses = (0..types.len() * policies).map(|_| normalized((0..5).map(|_| rng.gen::<f64>() + 0.01).collect())).collect();
    let edges = vec![-10.0, -5.0, 0.0, 5.0, 10.0, 15.0];
    let perf = PerformanceModel::from_histograms(types, ids, edges, masses).unwrap();
    (lib, TrainedModels::new(&obs, &perf).unwrap())
}

proptest! {
    #![proptest_config(cases(8))]

    #[test]
    fn long_term_selects_once_per_task_and_is_reproducible(
        seed in any::<u64>(),
        policies in 1usize..4,
        k in 1usize..4,
        selector in prop::sample::select(vec![Selector::Ei, Selector::Pi, Selector::Random]),
    ) {
        let (lib, models) = synthetic_long_term(policies, seed);
        let cfg = ExperimentConfig {
            seeds: Some(vec![seed % 1000, seed % 1000 + 1]),
            tasks: Some(k),
            num_subtasks: Some(3),
            selector,
            solver: SolverConfig { depth: 1, ..SolverConfig::default() },
            ..Default::default()
        };
        let out = run_long_term_with(&cfg, &lib, &models).unwrap();
        prop_assert_eq!(out.tasks.len(), 2 * k);
        prop_assert_eq!(out.metrics.len(), 2 * k);
        for run in out.seed_traces(k) {
            for (i, t) in run.iter().enumerate() {
                prop_assert_eq!(t.task, i);
                prop_assert!(lib.get(t.policy).is_some());
                prop_assert_eq!(t.policy_changed, i > 0 && run[i - 1].policy != t.policy);
            }
            if policies == 1 {
                prop_assert!(run.iter().all(|t| !t.policy_changed));
            }
        }
        let again = run_long_term_with(&cfg, &lib, &models).unwrap();
        prop_assert_eq!(out.metrics, again.metrics);
        prop_assert_eq!(out.tasks, again.tasks);
    }
}

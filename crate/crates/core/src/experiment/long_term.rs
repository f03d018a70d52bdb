use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::pipeline::LONG_TERM_TASK_TYPE;
use super::{opposite_type, read_json, write_csv, write_episodes, ExperimentConfig, PlotPoint, Selector};
use crate::abps::{
    select_policy_ei, select_policy_pi, task_regret, u_beta, update_type_belief, ObservationModel, PerformanceModel,
    PolicyId, PolicyLibrary, TrainedModels, TypeBelief,
};
use crate::env::{run_episode, Controller, EpisodeLog, Participant};
use crate::error::{config, Result};
use crate::human::build_human_model;
use crate::metrics::{compute_metrics, moving_average, MetricsRow};
use crate::seed;

pub const LONG_TERM_METRICS_FILE: &str = "long_term_metrics.csv";
pub const LONG_TERM_TASKS_FILE: &str = "long_term_tasks.csv";
pub const LONG_TERM_BELIEFS_FILE: &str = "long_term_beliefs.csv";
pub const LONG_TERM_EPISODES_FILE: &str = "long_term_episodes.jsonl";
pub const LONG_TERM_PLOT_FILE: &str = "long_term_plot.csv";

/// What happened at one task boundary of one participant.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TaskTrace {
    pub seed: u64,
    pub task: usize,
    pub human_type: String,
    pub policy: PolicyId,
    pub policy_changed: bool,
    pub utility: f64,
    pub regret: f64,
    pub regret_moving_average: f64,
    /// Posterior mass on the participant's true type after the task.
    pub belief_true_type: f64,
    pub belief_map_type: String,
}

#[derive(Debug, Clone, Default)]
pub struct LongTermOutput {
    /// One row per task, seeds in configuration order.
    pub metrics: Vec<MetricsRow>,
    pub tasks: Vec<TaskTrace>,
    /// Type posterior after each task, aligned with `tasks`.
    pub beliefs: Vec<Vec<f64>>,
    pub episodes: Vec<EpisodeLog>,
}

impl LongTermOutput {
    /// Per-seed slices of `tasks`, each `k` long.
    pub fn seed_traces(&self, k: usize) -> impl Iterator<Item = &[TaskTrace]> {
        self.tasks.chunks(k)
    }
}

struct SeedRun {
    metrics: Vec<MetricsRow>,
    tasks: Vec<TaskTrace>,
    beliefs: Vec<Vec<f64>>,
    episodes: Vec<EpisodeLog>,
}

fn select(
    cfg: &ExperimentConfig,
    perf: &PerformanceModel,
    belief: &TypeBelief,
    participant_seed: u64,
    task: usize,
) -> Result<PolicyId> {
    match cfg.selector {
        Selector::Ei => select_policy_ei(perf, belief),
        Selector::Pi => select_policy_pi(perf, belief, u_beta(perf, belief)?),
        Selector::Random => {
            let ids = perf.policies();
            let mut rng = seed::rng(participant_seed, &[0x73656c, task as u64]);
            Ok(ids[rng.gen_range(0..ids.len())])
        }
    }
}

fn run_seed(
    cfg: &ExperimentConfig,
    library: &PolicyLibrary,
    obs: &ObservationModel,
    perf: &PerformanceModel,
    participant_seed: u64,
    k: usize,
) -> Result<SeedRun> {
    let settings = cfg.settings(LONG_TERM_TASK_TYPE);
    let mut human_type = cfg.draw_type(participant_seed);
    let mut participant = Participant::new(build_human_model(human_type, seed::derive(participant_seed, &[0x6875])));
    let mut belief = TypeBelief::uniform(obs.types().len());
    let mut previous: Option<PolicyId> = None;
    let mut run = SeedRun { metrics: Vec::new(), tasks: Vec::new(), beliefs: Vec::new(), episodes: Vec::new() };
    let mut regrets = Vec::with_capacity(k);

    for task in 0..k {
        if task > 0 && cfg.type_switch_at == Some(task) {
            human_type = opposite_type(human_type);
            // Same person, new characteristics: experience carries over.
            participant.model = build_human_model(human_type, seed::derive(participant_seed, &[0x6875, 1]));
        }
        let policy = select(cfg, perf, &belief, participant_seed, task)?;
        let entry = library.get(policy).ok_or_else(|| config(format!("policy {policy} is not in the library")))?;
        let solver = cfg.solver.with_seed(seed::derive(participant_seed, &[0x736f6c, task as u64]));
        let mut controller = Controller::proactive(entry.model.clone(), solver);
        let log = run_episode(&settings, &mut participant, &mut controller, seed::derive(participant_seed, &[0x7461_736b, task as u64]))?;

        let mut row = compute_metrics(&log, task)?;
        let regret = task_regret(task, row.discounted_return, perf)?;
        row.regret = regret.regret;
        row.policy_changed = previous.is_some_and(|p| p != policy);
        previous = Some(policy);
        belief = update_type_belief(&belief, obs, policy, &log.decision_observations())?;
        regrets.push(row.regret);

        let true_index = obs.types().iter().position(|t| *t == human_type);
        run.tasks.push(TaskTrace {
            seed: participant_seed,
            task,
            human_type: human_type.to_string(),
            policy,
            policy_changed: row.policy_changed,
            utility: row.discounted_return,
            regret: row.regret,
            regret_moving_average: 0.0,
            belief_true_type: true_index.map_or(0.0, |i| belief.probs()[i]),
            belief_map_type: obs.types()[belief.argmax()].to_string(),
        });
        run.metrics.push(row);
        run.beliefs.push(belief.probs().to_vec());
        run.episodes.push(log);
    }
    for (t, avg) in run.tasks.iter_mut().zip(moving_average(&regrets, cfg.window)?) {
        t.regret_moving_average = avg;
    }
    Ok(run)
}

/// Runs the long-term experiment in memory against a trained library.
pub fn run_long_term_with(cfg: &ExperimentConfig, library: &PolicyLibrary, models: &TrainedModels) -> Result<LongTermOutput> {
    cfg.validate()?;
    let obs = models.observation_model()?;
    let perf = models.performance_model()?;
    if perf.policies() != library.ids().as_slice() {
        return Err(config("trained models and policy library list different policies"));
    }
    let k = cfg.tasks.unwrap_or(8);
    let runs: Vec<SeedRun> = cfg
        .seeds_or(11)
        .par_iter()
        .map(|&s| run_seed(cfg, library, &obs, &perf, s, k))
        .collect::<Result<_>>()?;

    let mut out = LongTermOutput::default();
    for (i, run) in runs.into_iter().enumerate() {
        out.metrics.extend(run.metrics.into_iter().map(|mut r| {
            r.task_id += i * k;
            r
        }));
        out.tasks.extend(run.tasks);
        out.beliefs.extend(run.beliefs);
        out.episodes.extend(run.episodes);
    }
    Ok(out)
}

/// Loads the kept policies and trained models from disk, runs the
/// long-term experiment and writes its outputs into `out_dir`.
pub fn run_long_term(cfg: &ExperimentConfig, out_dir: &Path) -> Result<LongTermOutput> {
    cfg.validate()?;
    let library: PolicyLibrary = read_json(&cfg.policies_file(out_dir))?;
    let models: TrainedModels = read_json(&cfg.models_file(out_dir))?;
    let out = run_long_term_with(cfg, &library, &models)?;

    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join(LONG_TERM_METRICS_FILE), &out.metrics)?;
    write_csv(&out_dir.join(LONG_TERM_TASKS_FILE), &out.tasks)?;
    write_beliefs(&out_dir.join(LONG_TERM_BELIEFS_FILE), &models, &out)?;
    write_csv(&out_dir.join(LONG_TERM_PLOT_FILE), &plot_points(&out, cfg.tasks.unwrap_or(8)))?;
    if cfg.write_episodes {
        write_episodes(&out_dir.join(LONG_TERM_EPISODES_FILE), &out.episodes)?;
    }
    Ok(out)
}

fn write_beliefs(path: &Path, models: &TrainedModels, out: &LongTermOutput) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    let mut header = vec!["seed".to_string(), "task".to_string()];
    header.extend(models.types.iter().map(|t| t.to_string()));
    w.write_record(&header)?;
    for (t, b) in out.tasks.iter().zip(&out.beliefs) {
        let mut rec = vec![t.seed.to_string(), t.task.to_string()];
        rec.extend(b.iter().map(|p| p.to_string()));
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// Per-task averages across seeds: regret, its moving average, the rate of
/// policy changes and the posterior mass on the true type.
fn plot_points(out: &LongTermOutput, k: usize) -> Vec<PlotPoint> {
    let seeds = out.tasks.len() / k.max(1);
    let mut points = Vec::new();
    let series: [(&str, fn(&TaskTrace) -> f64); 4] = [
        ("regret", |t| t.regret),
        ("regretMovingAverage", |t| t.regret_moving_average),
        ("policyChangeRate", |t| f64::from(u8::from(t.policy_changed))),
        ("beliefTrueType", |t| t.belief_true_type),
    ];
    for (name, f) in series {
        for task in 0..k {
            let y = out.tasks.iter().filter(|t| t.task == task).map(f).sum::<f64>() / seeds.max(1) as f64;
            points.push(PlotPoint { series: name.to_string(), x: (task + 1) as f64, y });
        }
    }
    points
}

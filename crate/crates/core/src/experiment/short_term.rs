use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{load_base_model, write_csv, write_episodes, ExperimentConfig, PlotPoint};
use crate::apomdp::{make_reactive_policy, ApomdpModel};
use crate::env::{run_episode, Controller, EpisodeLog, Participant};
use crate::error::Result;
use crate::human::build_human_model;
use crate::metrics::{compute_metrics, MetricsRow};
use crate::seed;

pub const SHORT_TERM_METRICS_FILE: &str = "short_term_metrics.csv";
pub const SHORT_TERM_CONDITIONS_FILE: &str = "short_term_conditions.csv";
pub const SHORT_TERM_SUMMARY_FILE: &str = "short_term_summary.csv";
pub const SHORT_TERM_EPISODES_FILE: &str = "short_term_episodes.jsonl";
pub const SHORT_TERM_PLOT_FILE: &str = "short_term_plot.csv";

const SHORT_TERM_TASK_TYPE: u8 = 2;
const TASKS_PER_ROBOT: usize = 3;
pub const TASKS_PER_PARTICIPANT: usize = 1 + 2 * TASKS_PER_ROBOT;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Condition {
    Alone,
    Reactive,
    Proactive,
}

impl Condition {
    pub const ALL: [Condition; 3] = [Condition::Alone, Condition::Reactive, Condition::Proactive];

    /// Condition of each task for a participant: alone first, then the two
    /// robots, reactive first for even seeds.
    pub fn schedule(participant_seed: u64) -> [Condition; TASKS_PER_PARTICIPANT] {
        let (first, second) = if participant_seed % 2 == 0 {
            (Condition::Reactive, Condition::Proactive)
        } else {
            (Condition::Proactive, Condition::Reactive)
        };
        let mut out = [first; TASKS_PER_PARTICIPANT];
        out[0] = Condition::Alone;
        out[1 + TASKS_PER_ROBOT..].fill(second);
        out
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionRow {
    pub seed: u64,
    pub task: usize,
    pub condition: Condition,
    pub human_type: String,
    pub s_task: f64,
    pub s_human: f64,
    pub c_human: f64,
    pub eta_task: f64,
    pub warnings: u32,
    pub discounted_return: f64,
    pub n_s_robot: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ConditionSummary {
    pub condition: Condition,
    pub tasks: usize,
    pub mean_reward: f64,
    pub total_warnings: u32,
    pub mean_warnings: f64,
    pub mean_s_task: f64,
    pub mean_eta: f64,
}

#[derive(Debug, Clone, Default)]
pub struct ShortTermOutput {
    pub metrics: Vec<MetricsRow>,
    pub conditions: Vec<ConditionRow>,
    pub summary: Vec<ConditionSummary>,
    pub episodes: Vec<EpisodeLog>,
}

fn run_seed(
    cfg: &ExperimentConfig,
    base: &ApomdpModel,
    participant_seed: u64,
) -> Result<(Vec<MetricsRow>, Vec<ConditionRow>, Vec<EpisodeLog>)> {
    let settings = cfg.settings(SHORT_TERM_TASK_TYPE);
    let human_type = cfg.draw_type(participant_seed);
    let mut participant = Participant::new(build_human_model(human_type, seed::derive(participant_seed, &[0x6875])));
    let mut out = (Vec::new(), Vec::new(), Vec::new());
    for (task, condition) in Condition::schedule(participant_seed).into_iter().enumerate() {
        let mut controller = match condition {
            Condition::Alone => Controller::Idle,
            Condition::Reactive => Controller::Reactive(make_reactive_policy(cfg.reactive_timeout)?),
            Condition::Proactive => Controller::proactive(
                base.clone(),
                cfg.solver.with_seed(seed::derive(participant_seed, &[0x736f6c, task as u64])),
            ),
        };
        let log = run_episode(&settings, &mut participant, &mut controller, seed::derive(participant_seed, &[0x7461_736b, task as u64]))?;
        let row = compute_metrics(&log, task)?;
        let summary = log.summary.as_ref().expect("completed episode");
        out.1.push(ConditionRow {
            seed: participant_seed,
            task,
            condition,
            human_type: human_type.to_string(),
            s_task: row.s_task,
            s_human: row.s_human,
            c_human: row.c_human,
            eta_task: row.eta_task,
            warnings: row.warnings,
            discounted_return: row.discounted_return,
            n_s_robot: summary.n_s_robot,
        });
        out.0.push(row);
        out.2.push(log);
    }
    Ok(out)
}

pub fn summarize(rows: &[ConditionRow]) -> Vec<ConditionSummary> {
    Condition::ALL
        .into_iter()
        .map(|condition| {
            let sel: Vec<_> = rows.iter().filter(|r| r.condition == condition).collect();
            let n = sel.len();
            let mean = |f: fn(&ConditionRow) -> f64| if n == 0 { 0.0 } else { sel.iter().map(|r| f(r)).sum::<f64>() / n as f64 };
            let total_warnings = sel.iter().map(|r| r.warnings).sum();
            ConditionSummary {
                condition,
                tasks: n,
                mean_reward: mean(|r| r.discounted_return),
                total_warnings,
                mean_warnings: mean(|r| f64::from(r.warnings)),
                mean_s_task: mean(|r| r.s_task),
                mean_eta: mean(|r| r.eta_task),
            }
        })
        .collect()
}

/// Runs the alone, reactive and proactive conditions in memory.
pub fn run_short_term_with(cfg: &ExperimentConfig, base: &ApomdpModel) -> Result<ShortTermOutput> {
    cfg.validate()?;
    let runs: Vec<_> = cfg.seeds_or(14).par_iter().map(|&s| run_seed(cfg, base, s)).collect::<Result<_>>()?;
    let mut out = ShortTermOutput::default();
    for (i, (metrics, conditions, episodes)) in runs.into_iter().enumerate() {
        out.metrics.extend(metrics.into_iter().map(|mut r| {
            r.task_id += i * TASKS_PER_PARTICIPANT;
            r
        }));
        out.conditions.extend(conditions);
        out.episodes.extend(episodes);
    }
    out.summary = summarize(&out.conditions);
    Ok(out)
}

/// Loads the base model and writes the short-term outputs into `out_dir`.
pub fn run_short_term(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ShortTermOutput> {
    cfg.validate()?;
    let base = load_base_model(cfg, out_dir)?;
    let out = run_short_term_with(cfg, &base)?;
    fs::create_dir_all(out_dir)?;
    write_csv(&out_dir.join(SHORT_TERM_METRICS_FILE), &out.metrics)?;
    write_csv(&out_dir.join(SHORT_TERM_CONDITIONS_FILE), &out.conditions)?;
    write_csv(&out_dir.join(SHORT_TERM_SUMMARY_FILE), &out.summary)?;
    write_csv(&out_dir.join(SHORT_TERM_PLOT_FILE), &plot_points(&out.conditions))?;
    if cfg.write_episodes {
        write_episodes(&out_dir.join(SHORT_TERM_EPISODES_FILE), &out.episodes)?;
    }
    Ok(out)
}

/// Mean reward and warnings per participant and condition, x being the
/// participant's position in the seed list.
fn plot_points(rows: &[ConditionRow]) -> Vec<PlotPoint> {
    let mut seeds: Vec<u64> = Vec::new();
    for r in rows {
        if seeds.last() != Some(&r.seed) {
            seeds.push(r.seed);
        }
    }
    let mut points = Vec::new();
    for condition in Condition::ALL {
        let name = serde_json::to_value(condition).expect("unit variant").as_str().unwrap_or_default().to_string();
        for (x, s) in seeds.iter().enumerate() {
            let sel: Vec<_> = rows.iter().filter(|r| r.seed == *s && r.condition == condition).collect();
            let n = sel.len().max(1) as f64;
            points.push(PlotPoint {
                series: format!("{name}Reward"),
                x: x as f64,
                y: sel.iter().map(|r| r.discounted_return).sum::<f64>() / n,
            });
            points.push(PlotPoint {
                series: format!("{name}Warnings"),
                x: x as f64,
                y: sel.iter().map(|r| f64::from(r.warnings)).sum::<f64>() / n,
            });
        }
    }
    points
}

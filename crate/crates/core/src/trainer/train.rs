use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::io::Write;

use super::{annotated_steps, calibrate_model, estimate_tables};
use crate::abps::{ObservationModel, PerformanceModel, PolicyId, PolicyLibrary, DEFAULT_BINS};
use crate::apomdp::{ApomdpModel, NUM_ACTIONS};
use crate::env::{run_episode, Controller, EpisodeSettings, Participant};
use crate::error::{config, Result};
use crate::human::{build_human_model, HumanType};
use crate::seed;
use crate::solver::SolverConfig;

/// Rows of the T/O tables need this many annotated steps before their
/// estimate replaces the hand-authored values.
pub const MIN_ROW_SAMPLES: u64 = 30;

#[derive(Debug, Clone)]
pub struct TrainingPlan {
    pub type_space: Vec<HumanType>,
    pub candidates: PolicyLibrary,
    pub episodes_per_pair: usize,
    pub seed: u64,
    pub settings: EpisodeSettings,
    pub solver: SolverConfig,
}

impl TrainingPlan {
    pub fn validate(&self) -> Result<()> {
        if self.episodes_per_pair == 0 {
            return Err(config("episodes per pair must be at least one"));
        }
        if self.type_space.is_empty() {
            return Err(config("training needs at least one human type"));
        }
        self.solver.validate()?;
        self.settings.task.validate()
    }

    /// Number of episodes the plan schedules.
    pub fn total_episodes(&self) -> usize {
        self.type_space.len() * self.candidates.len() * self.episodes_per_pair
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TrainingSummaryRow {
    #[serde(rename = "type")]
    pub human_type: String,
    pub policy: PolicyId,
    pub mean_return: f64,
    pub std_return: f64,
    pub episodes: usize,
}

#[derive(Debug, Clone)]
pub struct TrainingOutput {
    pub observation: ObservationModel,
    pub performance: PerformanceModel,
    pub summary: Vec<TrainingSummaryRow>,
}

struct Cell {
    observation: ObservationModel,
    returns: Vec<f64>,
}

/// Runs every (type, policy) cell for `episodes_per_pair` tasks with the
/// online solver and fits the selection priors. Cells run in parallel
/// with seeds derived from the plan seed and merge in cell order.
pub fn train_models(plan: &TrainingPlan) -> Result<TrainingOutput> {
    plan.validate()?;
    let types = plan.type_space.clone();
    let policies = plan.candidates.ids();
    let cells: Vec<(usize, usize)> =
        (0..types.len()).flat_map(|t| (0..policies.len()).map(move |p| (t, p))).collect();

    let results: Vec<Cell> = cells
        .par_iter()
        .map(|&(t, p)| -> Result<Cell> {
            let entry = &plan.candidates.entries[p];
            let human_seed = seed::derive(plan.seed, &[0x6875, t as u64, entry.id as u64]);
            let mut participant = Participant::new(build_human_model(types[t], human_seed));
            let mut controller = Controller::proactive(entry.model.clone(), plan.solver);
            let mut observation = ObservationModel::new(types.clone(), policies.clone())?;
            let mut returns = Vec::with_capacity(plan.episodes_per_pair);
            for e in 0..plan.episodes_per_pair {
                let s = seed::derive(plan.seed, &[0x6570, t as u64, entry.id as u64, e as u64]);
                let log = run_episode(&plan.settings, &mut participant, &mut controller, s)?;
                for sigma in log.decision_observations() {
                    observation.record(t, entry.id, &sigma)?;
                }
                returns.push(log.summary.as_ref().expect("completed episode").discounted_return);
            }
            Ok(Cell { observation, returns })
        })
        .collect::<Result<_>>()?;

    let mut observation = ObservationModel::new(types.clone(), policies.clone())?;
    let mut summary = Vec::with_capacity(results.len());
    for (&(t, p), cell) in cells.iter().zip(&results) {
        observation.merge(&cell.observation)?;
        let n = cell.returns.len() as f64;
        let mean = cell.returns.iter().sum::<f64>() / n;
        let var = cell.returns.iter().map(|r| (r - mean).powi(2)).sum::<f64>() / n;
        summary.push(TrainingSummaryRow {
            human_type: types[t].to_string(),
            policy: policies[p],
            mean_return: mean,
            std_return: var.sqrt(),
            episodes: cell.returns.len(),
        });
    }
    let returns: Vec<Vec<f64>> = results.into_iter().map(|c| c.returns).collect();
    let performance = PerformanceModel::fit(types, policies, &returns, DEFAULT_BINS)?;
    Ok(TrainingOutput { observation, performance, summary })
}

/// CSV with columns type, policy, meanReturn, stdReturn, episodes.
pub fn write_training_summary<W: Write>(rows: &[TrainingSummaryRow], w: W) -> Result<()> {
    let mut out = csv::Writer::from_writer(w);
    for r in rows {
        out.serialize(r)?;
    }
    out.flush()?;
    Ok(())
}

/// Fits the base model's T/O tables to annotated traces of a uniformly
/// random robot working with every type in `types`.
pub fn calibrate_base_model(
    base: &ApomdpModel,
    types: &[HumanType],
    episodes_per_type: usize,
    settings: &EpisodeSettings,
    seed: u64,
) -> Result<ApomdpModel> {
    if types.is_empty() || episodes_per_type == 0 {
        return Err(config("calibration needs at least one type and one episode"));
    }
    let per_type: Vec<_> = types
        .par_iter()
        .enumerate()
        .map(|(i, &t)| -> Result<Vec<_>> {
            let mut participant = Participant::new(build_human_model(t, seed::derive(seed, &[0x6361, i as u64])));
            let mut controller = Controller::Random;
            let mut steps = Vec::new();
            for e in 0..episodes_per_type {
                let log = run_episode(settings, &mut participant, &mut controller, seed::derive(seed, &[i as u64, e as u64]))?;
                steps.extend(annotated_steps(&log));
            }
            Ok(steps)
        })
        .collect::<Result<_>>()?;
    let steps: Vec<_> = per_type.into_iter().flatten().collect();
    let est = estimate_tables(&steps, base.num_states(), NUM_ACTIONS)?;
    calibrate_model(base, &est, MIN_ROW_SAMPLES)
}

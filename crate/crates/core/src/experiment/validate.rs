use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::fs;
use std::path::Path;

use super::{write_json, ExperimentConfig};
use crate::error::{config, Result};
use crate::human::{build_human_model, generate_trace, trace_likelihood, HumanModel, HumanType};
use crate::seed;

pub const VALIDATION_MATRIX_FILE: &str = "human_validation_matrix.csv";
pub const VALIDATION_VERDICT_FILE: &str = "human_validation_verdict.json";

/// Likelihood of every model's generated traces under every model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ValidationOutput {
    pub models: Vec<String>,
    /// `matrix[i][j]`: traces of model `i` scored by model `j`.
    pub matrix: Vec<Vec<f64>>,
    pub row_dominant: Vec<bool>,
    pub dominant: bool,
}

/// Generates `tasks` traces of `len` actions per model and scores every
/// trace set against every model.
pub fn likelihood_matrix(models: &[HumanModel], names: Vec<String>, tasks: usize, len: usize, base_seed: u64) -> Result<ValidationOutput> {
    if models.is_empty() || names.len() != models.len() {
        return Err(config("validation needs one name per model and at least one model"));
    }
    let traces: Vec<Vec<_>> = models
        .iter()
        .enumerate()
        .map(|(i, m)| (0..tasks).map(|j| generate_trace(m, len, &mut seed::rng(base_seed, &[0x7472, i as u64, j as u64]))).collect())
        .collect();
    let matrix: Vec<Vec<f64>> = traces
        .par_iter()
        .map(|set| models.iter().map(|m| trace_likelihood(m, set)).collect::<Result<Vec<_>>>())
        .collect::<Result<_>>()?;
    let row_dominant: Vec<bool> =
        matrix.iter().enumerate().map(|(i, row)| row.iter().enumerate().all(|(j, &v)| j == i || row[i] > v)).collect();
    let dominant = row_dominant.iter().all(|&d| d);
    Ok(ValidationOutput { models: names, matrix, row_dominant, dominant })
}

/// Builds the configured human models, writes the likelihood matrix and the
/// diagonal-dominance verdict.
pub fn validate_human(cfg: &ExperimentConfig, out_dir: &Path) -> Result<ValidationOutput> {
    cfg.validate()?;
    if cfg.validation_types.len() < 2 {
        return Err(config("validation needs at least two human models"));
    }
    let types: Vec<HumanType> = cfg.validation_types.iter().map(|&i| HumanType::from_index(i).expect("validated index")).collect();
    let models: Vec<HumanModel> =
        types.iter().enumerate().map(|(i, &t)| build_human_model(t, seed::derive(cfg.seed, &[0x6876, i as u64]))).collect();
    let names = types.iter().map(ToString::to_string).collect();
    let out = likelihood_matrix(&models, names, cfg.validation_tasks, cfg.validation_trace_length, seed::derive(cfg.seed, &[0x76616c]))?;

    fs::create_dir_all(out_dir)?;
    let mut w = csv::Writer::from_path(out_dir.join(VALIDATION_MATRIX_FILE))?;
    let mut header = vec!["traces".to_string()];
    header.extend(out.models.iter().cloned());
    w.write_record(&header)?;
    for (name, row) in out.models.iter().zip(&out.matrix) {
        let mut rec = vec![name.clone()];
        rec.extend(row.iter().map(|v| format!("{v:e}")));
        w.write_record(&rec)?;
    }
    w.flush()?;
    write_json(&out_dir.join(VALIDATION_VERDICT_FILE), &out)?;
    Ok(out)
}

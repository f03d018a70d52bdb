//! End-to-end experiment drivers: library generation, training, the
//! proactive-versus-reactive comparison, long-term policy selection, and
//! human-model validation. Every driver is a deterministic function of its
//! configuration and writes its outputs into one directory.

mod long_term;
mod pipeline;
mod report;
mod short_term;
mod validate;

use rand::distributions::{Distribution, WeightedIndex};
use serde::{Deserialize, Serialize};
use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use crate::apomdp::ApomdpModel;
use crate::env::{EpisodeLog, EpisodeSettings, TaskConfig};
use crate::error::{config, Result};
use crate::human::{HumanType, NUM_TYPES};
use crate::seed;
use crate::solver::SolverConfig;

pub use long_term::{
    run_long_term, run_long_term_with, LongTermOutput, TaskTrace, LONG_TERM_BELIEFS_FILE, LONG_TERM_EPISODES_FILE,
    LONG_TERM_METRICS_FILE, LONG_TERM_PLOT_FILE, LONG_TERM_TASKS_FILE,
};
pub use pipeline::{gen_library, train};
pub use report::{report, REPORT_FILE};
pub use short_term::{
    run_short_term, run_short_term_with, summarize, Condition, ConditionRow, ConditionSummary, ShortTermOutput,
    SHORT_TERM_CONDITIONS_FILE, SHORT_TERM_EPISODES_FILE, SHORT_TERM_METRICS_FILE, SHORT_TERM_PLOT_FILE,
    SHORT_TERM_SUMMARY_FILE, TASKS_PER_PARTICIPANT,
};
pub use validate::{likelihood_matrix, validate_human, ValidationOutput, VALIDATION_MATRIX_FILE, VALIDATION_VERDICT_FILE};

pub const BASE_MODEL_FILE: &str = "base_model.json";
pub const LIBRARY_FILE: &str = "library.json";
pub const MODELS_FILE: &str = "models.json";
pub const POLICIES_FILE: &str = "policies.json";
pub const TRAINING_SUMMARY_FILE: &str = "training_summary.csv";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    GenLibrary,
    Train,
    ShortTerm,
    LongTerm,
    ValidateHuman,
}

/// How the long-term driver picks the policy for the next task.
#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Selector {
    #[default]
    Ei,
    Pi,
    Random,
}

/// The proactive robot's default lookahead: two levels with exact
/// observation weights, pruning branches below 0.1% mass.
pub fn proactive_solver() -> SolverConfig {
    SolverConfig { depth: 2, width: 8, seed: 0, enumerate: true, prune: 1e-3 }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default)]
pub struct ExperimentConfig {
    pub mode: Option<Mode>,
    pub seed: u64,
    /// Tasks per participant in the long-term experiment (K).
    pub tasks: Option<usize>,
    pub task_type: Option<u8>,
    pub num_subtasks: Option<u32>,
    /// One simulated participant per seed.
    pub seeds: Option<Vec<u64>>,
    /// Weights over the 16 human types; empty means uniform.
    pub type_distribution: Vec<f64>,
    /// Task index from which the participant behaves as the opposite type.
    pub type_switch_at: Option<usize>,
    pub selector: Selector,
    pub episodes: usize,
    pub calibration_episodes: usize,
    pub calibration_task_type: u8,
    pub library_size: usize,
    pub magnitudes: Vec<f64>,
    pub keep: usize,
    pub solver: SolverConfig,
    pub reactive_timeout: u32,
    pub window: usize,
    pub validation_types: Vec<usize>,
    pub validation_tasks: usize,
    pub validation_trace_length: usize,
    pub write_episodes: bool,
    pub base_model_path: Option<PathBuf>,
    pub library_path: Option<PathBuf>,
    pub policies_path: Option<PathBuf>,
    pub models_path: Option<PathBuf>,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            mode: None,
            seed: 0,
            tasks: None,
            task_type: None,
            num_subtasks: None,
            seeds: None,
            type_distribution: Vec::new(),
            type_switch_at: None,
            selector: Selector::Ei,
            episodes: 10,
            calibration_episodes: 10,
            calibration_task_type: 2,
            library_size: 8,
            magnitudes: vec![0.5, 1.0],
            keep: 6,
            solver: proactive_solver(),
            reactive_timeout: 8,
            window: crate::metrics::DEFAULT_WINDOW,
            // Types with an even number of High characteristics.
            validation_types: vec![0, 3, 5, 6, 9, 10, 12, 15],
            validation_tasks: 100,
            validation_trace_length: 60,
            write_episodes: true,
            base_model_path: None,
            library_path: None,
            policies_path: None,
            models_path: None,
        }
    }
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let cfg: Self = serde_json::from_str(&fs::read_to_string(path)?)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.tasks == Some(0) {
            return Err(config("K must be at least 1"));
        }
        if self.seeds.as_ref().is_some_and(Vec::is_empty) {
            return Err(config("at least one seed is required"));
        }
        if !self.type_distribution.is_empty()
            && (self.type_distribution.len() != NUM_TYPES
                || self.type_distribution.iter().any(|w| !(*w >= 0.0))
                || self.type_distribution.iter().sum::<f64>() <= 0.0)
        {
            return Err(config("type distribution needs 16 non-negative weights with a positive sum"));
        }
        if self.episodes == 0 || self.calibration_episodes == 0 || self.library_size == 0 || self.keep == 0 {
            return Err(config("episode counts and library sizes must be positive"));
        }
        if self.window == 0 {
            return Err(config("moving-average window must be at least 1"));
        }
        if self.validation_types.iter().any(|&t| t >= NUM_TYPES) {
            return Err(config("validation type index out of range"));
        }
        self.solver.validate()?;
        self.task(5).validate()?;
        TaskConfig::of_type(self.calibration_task_type).validate()
    }

    /// Task rules for the configured task type, or `fallback`.
    pub fn task(&self, fallback: u8) -> TaskConfig {
        let mut t = TaskConfig::of_type(self.task_type.unwrap_or(fallback));
        if let Some(n) = self.num_subtasks {
            t.num_subtasks = n;
        }
        t
    }

    pub fn settings(&self, fallback_task_type: u8) -> EpisodeSettings {
        EpisodeSettings::for_task(self.task(fallback_task_type))
    }

    pub fn seeds_or(&self, default_count: u64) -> Vec<u64> {
        self.seeds.clone().unwrap_or_else(|| (0..default_count).collect())
    }

    /// The participant's type for `seed`, drawn from the configured
    /// distribution.
    pub fn draw_type(&self, seed: u64) -> HumanType {
        let weights = if self.type_distribution.is_empty() { vec![1.0; NUM_TYPES] } else { self.type_distribution.clone() };
        let dist = WeightedIndex::new(&weights).expect("validated weights");
        let i = dist.sample(&mut seed::rng(seed, &[0x7479_7065]));
        HumanType::from_index(i).expect("index below 16")
    }

    fn input(&self, explicit: &Option<PathBuf>, dir: &Path, name: &str) -> PathBuf {
        explicit.clone().unwrap_or_else(|| dir.join(name))
    }

    pub fn base_model_file(&self, dir: &Path) -> PathBuf {
        self.input(&self.base_model_path, dir, BASE_MODEL_FILE)
    }

    pub fn library_file(&self, dir: &Path) -> PathBuf {
        self.input(&self.library_path, dir, LIBRARY_FILE)
    }

    pub fn policies_file(&self, dir: &Path) -> PathBuf {
        self.input(&self.policies_path, dir, POLICIES_FILE)
    }

    pub fn models_file(&self, dir: &Path) -> PathBuf {
        self.input(&self.models_path, dir, MODELS_FILE)
    }
}

/// The participant of the opposite type on every characteristic.
pub fn opposite_type(t: HumanType) -> HumanType {
    HumanType::from_index(NUM_TYPES - 1 - t.index()).expect("index below 16")
}

fn read_json<T: serde::de::DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| config(format!("cannot read {}: {e}", path.display())))?;
    Ok(serde_json::from_reader(std::io::BufReader::new(file))?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

fn write_csv<T: Serialize>(path: &Path, rows: &[T]) -> Result<()> {
    let mut w = csv::Writer::from_path(path)?;
    for r in rows {
        w.serialize(r)?;
    }
    w.flush()?;
    Ok(())
}

fn write_episodes(path: &Path, logs: &[EpisodeLog]) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    for log in logs {
        log.write_jsonl(&mut w)?;
    }
    w.flush()?;
    Ok(())
}

fn load_base_model(cfg: &ExperimentConfig, dir: &Path) -> Result<ApomdpModel> {
    let model: ApomdpModel = read_json(&cfg.base_model_file(dir))?;
    model.validate()?;
    Ok(model)
}

/// One x/y point of a plot series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlotPoint {
    pub series: String,
    pub x: f64,
    pub y: f64,
}

use std::fs::{self, File};
use std::io::BufWriter;
use std::path::Path;

use super::{read_json, write_json, ExperimentConfig, BASE_MODEL_FILE, LIBRARY_FILE, MODELS_FILE, POLICIES_FILE, TRAINING_SUMMARY_FILE};
use crate::abps::{generate_library, PolicyLibrary, TrainedModels};
use crate::apomdp::{build_base_model, RewardSpec, DEFAULT_GAMMA};
use crate::env::EpisodeSettings;
use crate::error::Result;
use crate::human::make_type_space;
use crate::seed;
use crate::trainer::{calibrate_base_model, prune_library, train_models, write_training_summary, TrainingPlan};

/// Deployment task type the library is trained for.
pub(super) const LONG_TERM_TASK_TYPE: u8 = 5;

/// Calibrates the base A-POMDP against simulated traces and perturbs it
/// into the candidate library. Writes `base_model.json` and `library.json`.
pub fn gen_library(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PolicyLibrary> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let settings = EpisodeSettings::for_task(crate::env::TaskConfig::of_type(cfg.calibration_task_type));
    let base = build_base_model(RewardSpec::default(), DEFAULT_GAMMA)?;
    let calibrated =
        calibrate_base_model(&base, &make_type_space(), cfg.calibration_episodes, &settings, seed::derive(cfg.seed, &[0x63616c]))?;
    let library = generate_library(&calibrated, cfg.library_size, &cfg.magnitudes, seed::derive(cfg.seed, &[0x6c6962]))?;
    write_json(&out_dir.join(BASE_MODEL_FILE), &calibrated)?;
    write_json(&out_dir.join(LIBRARY_FILE), &library)?;
    Ok(library)
}

/// Trains observation and performance models for every (type, candidate)
/// pair, prunes the library, and writes the kept policies with their models.
pub fn train(cfg: &ExperimentConfig, out_dir: &Path) -> Result<(PolicyLibrary, TrainedModels)> {
    cfg.validate()?;
    fs::create_dir_all(out_dir)?;
    let candidates: PolicyLibrary = read_json(&cfg.library_file(out_dir))?;
    for e in candidates.ids() {
        candidates.get(e).expect("listed id").model.validate()?;
    }
    let plan = TrainingPlan {
        type_space: make_type_space(),
        candidates: candidates.clone(),
        episodes_per_pair: cfg.episodes,
        seed: seed::derive(cfg.seed, &[0x74726e]),
        settings: cfg.settings(LONG_TERM_TASK_TYPE),
        solver: cfg.solver,
    };
    let out = train_models(&plan)?;
    write_training_summary(&out.summary, BufWriter::new(File::create(out_dir.join(TRAINING_SUMMARY_FILE))?))?;

    let keep = cfg.keep.min(candidates.len());
    let kept = prune_library(&candidates, &out.performance, keep)?;
    let ids = kept.ids();
    let models = TrainedModels::new(&out.observation.restrict(&ids)?, &out.performance.restrict(&ids)?)?;
    write_json(&out_dir.join(POLICIES_FILE), &kept)?;
    write_json(&out_dir.join(MODELS_FILE), &models)?;
    Ok((kept, models))
}

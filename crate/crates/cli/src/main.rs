use std::path::PathBuf;

use anyhow::{Context, Result};
use clap::{Args, Parser, Subcommand};
use cobot::experiment::{self, ExperimentConfig};

#[derive(Parser)]
#[command(name = "cobot", version, about = "Simulated human-robot collaboration experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Calibrate the base decision model and generate candidate policies.
    GenLibrary(Common),
    /// Train observation and performance models and prune the library.
    Train(Common),
    /// Compare the proactive robot with the reactive baseline.
    ShortTerm(Common),
    /// Run adaptive policy selection over consecutive tasks.
    LongTerm(Common),
    /// Check that simulated human models are distinguishable from their traces.
    ValidateHuman(Common),
    /// Summarize the outputs found in the output directory.
    Report(Common),
}

#[derive(Args)]
struct Common {
    /// JSON experiment configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Base seed for every random choice.
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Training episodes per type and policy pair.
    #[arg(long)]
    episodes: Option<usize>,
    /// Tasks per participant (K).
    #[arg(long)]
    tasks: Option<usize>,
}

impl Common {
    fn config(&self) -> Result<ExperimentConfig> {
        let mut cfg = match &self.config {
            Some(path) => ExperimentConfig::load(path).with_context(|| format!("loading {}", path.display()))?,
            None => ExperimentConfig::default(),
        };
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        if let Some(episodes) = self.episodes {
            cfg.episodes = episodes;
        }
        if self.tasks.is_some() {
            cfg.tasks = self.tasks;
        }
        cfg.validate()?;
        Ok(cfg)
    }
}

fn main() -> Result<()> {
    let cli = Cli::parse();
    match cli.command {
        Command::GenLibrary(c) => {
            let library = experiment::gen_library(&c.config()?, &c.out_dir)?;
            println!("generated {} candidate policies in {}", library.len(), c.out_dir.display());
        }
        Command::Train(c) => {
            let (library, _) = experiment::train(&c.config()?, &c.out_dir)?;
            println!("kept policies {:?}", library.ids());
        }
        Command::ShortTerm(c) => {
            let out = experiment::run_short_term(&c.config()?, &c.out_dir)?;
            for s in &out.summary {
                println!(
                    "{:?}: {} tasks, mean reward {:.3}, warnings {}, S_task {:.3}, eta {:.3}",
                    s.condition, s.tasks, s.mean_reward, s.total_warnings, s.mean_s_task, s.mean_eta
                );
            }
        }
        Command::LongTerm(c) => {
            let out = experiment::run_long_term(&c.config()?, &c.out_dir)?;
            let changes = out.metrics.iter().filter(|r| r.policy_changed).count();
            let regret = out.metrics.iter().map(|r| r.regret).sum::<f64>() / out.metrics.len() as f64;
            println!("{} tasks, {changes} policy changes, mean regret {regret:.3}", out.metrics.len());
        }
        Command::ValidateHuman(c) => {
            let out = experiment::validate_human(&c.config()?, &c.out_dir)?;
            let rows = out.row_dominant.iter().filter(|&&d| d).count();
            println!("{rows}/{} rows diagonally dominant", out.models.len());
        }
        Command::Report(c) => print!("{}", experiment::report(&c.out_dir)?),
    }
    Ok(())
}

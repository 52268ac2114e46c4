use std::path::PathBuf;

use clap::{Args, Parser, Subcommand, ValueEnum};
use ices::config::{IcesConfig, SweepParameter};
use ices::saferl::Algorithm;

#[derive(Debug, Parser)]
#[command(
    name = "ices",
    version,
    about = "Train and evaluate community energy pricing agents"
)]
pub struct Cli {
    #[command(flatten)]
    pub common: Common,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Train one agent and write its metrics and checkpoints.
    Train,
    /// Roll out a checkpoint without exploration noise.
    Eval(EvalArgs),
    /// Train a grid of hyperparameter values over several seeds.
    Sweep(SweepArgs),
    /// Train detailed and simplified CHP models on the same seeds.
    AblateChp(SeedsArg),
    /// Rebuild the summary table of a sweep or ablation directory.
    Summarize { dir: PathBuf },
}

/// Flags accepted by every subcommand. Each overrides the config file.
#[derive(Debug, Args)]
pub struct Common {
    /// Configuration file.
    #[arg(long, global = true, env = "ICES_CONFIG")]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long, global = true)]
    pub out: Option<PathBuf>,
    #[arg(long, global = true)]
    pub seed: Option<u64>,
    #[arg(long, global = true)]
    pub episodes: Option<usize>,
    #[arg(long, global = true, value_enum)]
    pub algo: Option<AlgoArg>,
    /// Fixed multiplier of the penalty baseline.
    #[arg(long, global = true)]
    pub penalty: Option<f64>,
    /// Parallel training runs.
    #[arg(long, global = true)]
    pub workers: Option<usize>,
    /// Replace the output directory if it is not empty.
    #[arg(long, global = true)]
    pub force: bool,
    #[arg(long, global = true)]
    pub day: Option<PathBuf>,
    #[arg(long, global = true)]
    pub topology: Option<PathBuf>,
    #[arg(long, global = true)]
    pub augment_state: bool,
    #[arg(long, global = true)]
    pub simplified_chp: bool,
    #[arg(long, global = true)]
    pub include_line_limits: bool,
    #[arg(long, global = true)]
    pub literal_reward: bool,
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum AlgoArg {
    PdTd3,
    Td3Penalty,
}

impl From<AlgoArg> for Algorithm {
    fn from(a: AlgoArg) -> Self {
        match a {
            AlgoArg::PdTd3 => Algorithm::PdTd3,
            AlgoArg::Td3Penalty => Algorithm::Td3Penalty,
        }
    }
}

#[derive(Debug, Args)]
pub struct EvalArgs {
    #[arg(long)]
    pub checkpoint: PathBuf,
}

#[derive(Debug, Args)]
pub struct SeedsArg {
    /// Comma-separated seeds.
    #[arg(long, value_delimiter = ',')]
    pub seeds: Option<Vec<u64>>,
}

#[derive(Debug, Args)]
pub struct SweepArgs {
    #[arg(long)]
    pub parameter: Option<SweepParameter>,
    /// Comma-separated values.
    #[arg(long, value_delimiter = ',', num_args = 0..)]
    pub values: Option<Vec<f64>>,
    #[command(flatten)]
    pub seeds: SeedsArg,
}

impl Common {
    /// Applies the flags that were given on top of `cfg`.
    pub fn apply(&self, cfg: &mut IcesConfig) {
        if let Some(out) = &self.out {
            cfg.run.out.clone_from(out);
        }
        if let Some(seed) = self.seed {
            cfg.run.seed = seed;
        }
        if let Some(n) = self.episodes {
            cfg.run.episodes = n;
        }
        if let Some(a) = self.algo {
            cfg.agent.algorithm = a.into();
        }
        if let Some(p) = self.penalty {
            cfg.agent.penalty = p;
        }
        if let Some(w) = self.workers {
            cfg.run.workers = w;
        }
        if let Some(d) = &self.day {
            cfg.run.day = Some(d.clone());
        }
        if let Some(t) = &self.topology {
            cfg.run.topology = Some(t.clone());
        }
        cfg.env.augment_state |= self.augment_state;
        cfg.env.simplified_chp |= self.simplified_chp;
        cfg.env.include_line_limits |= self.include_line_limits;
        cfg.env.literal_reward |= self.literal_reward;
    }
}

use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use ices::config::IcesConfig;
use ices::environment::{Environment, IcesModel};
use ices::saferl::report::{tail_mean, Field};
use ices::saferl::{
    continue_training_with, evaluate, write_trace, Checkpoint, RunFiles, TrainOutput, Trainer,
};
use ices::Error;
use serde::Serialize;

use crate::rundir::{self, Provenance};

/// Episodes averaged for "final" figures.
pub const FINAL_WINDOW: usize = 30;

pub fn run_files(dir: &Path, cfg: &IcesConfig) -> RunFiles {
    let k = cfg.run.checkpoint_every;
    RunFiles {
        dir: dir.to_path_buf(),
        checkpoint_every: (k > 0).then_some(k),
    }
}

/// Trains one agent into `files.dir`, logging progress to stderr.
pub fn train_into(
    model: &IcesModel,
    cfg: &IcesConfig,
    seed: u64,
    files: &RunFiles,
    label: &str,
) -> Result<TrainOutput> {
    let total = cfg.run.episodes;
    let every = (total / 10).max(1);
    let trainer = Trainer::new(model.clone(), cfg.agent.clone(), seed, total)?;
    let out = continue_training_with(trainer, total, Some(files), |m| {
        if m.episode % every == 0 || m.episode == total {
            eprintln!(
                "{label}episode {}/{total}  reward {:.1}  cost {:.3}  lambda {:.3}",
                m.episode, m.cumulative_reward, m.cumulative_cost, m.lambda
            );
        }
    })?;
    Ok(out)
}

pub fn train(cfg: &IcesConfig, force: bool, prov: &Provenance) -> Result<()> {
    let model = cfg.model()?;
    let dir = &cfg.run.out;
    rundir::prepare(dir, force)?;
    rundir::write_metadata(dir, cfg, &[cfg.run.seed], prov)?;
    let out = train_into(&model, cfg, cfg.run.seed, &run_files(dir, cfg), "")?;
    let window = FINAL_WINDOW.min(out.metrics.len());
    if let (Some(r), Some(c)) = (
        tail_mean(&out.metrics, window, Field::Reward),
        tail_mean(&out.metrics, window, Field::Cost),
    ) {
        println!(
            "trained {} episodes; last {window}: mean reward {r:.2}, mean cost {c:.4}, lambda {:.4}",
            out.metrics.len(),
            out.trainer.agent.lambda
        );
    } else {
        println!("trained 0 episodes");
    }
    println!("wrote {}", dir.display());
    Ok(())
}

#[derive(Debug, Serialize)]
struct EpisodeSummary {
    reward: f64,
    cost: f64,
    discounted_reward: f64,
    discounted_cost: f64,
}

#[derive(Debug, Serialize)]
struct EvalReport<'a> {
    checkpoint: &'a Path,
    trained_episodes: usize,
    seed: u64,
    episodes: usize,
    gamma: f64,
    reward: f64,
    cost: f64,
    discounted_reward: f64,
    discounted_cost: f64,
    per_episode: Vec<EpisodeSummary>,
}

pub fn eval(cfg: &IcesConfig, checkpoint: &Path, force: bool) -> Result<()> {
    let cp = Checkpoint::load(checkpoint)?;
    let model = cfg.model()?;
    if model.state_dim() != cp.state_dim {
        return Err(Error::Dimension {
            expected: cp.state_dim,
            actual: model.state_dim(),
        })
        .context("checkpoint state size does not match the environment (check --augment-state)");
    }
    let n = cfg.run.eval_episodes;
    if n == 0 {
        return Err(Error::config("evaluation needs at least one episode").into());
    }
    let agent = cp.agent()?;
    let gamma = cp.config.gamma;
    let mut env = Environment::new(model, cfg.run.seed);
    let summary = evaluate(&mut env, &agent, n, gamma)?;

    let dir = &cfg.run.out;
    rundir::prepare(dir, force)?;
    fs::write(dir.join("config.toml"), cfg.to_toml()?)
        .with_context(|| format!("writing {}", dir.display()))?;
    let report = EvalReport {
        checkpoint,
        trained_episodes: cp.episodes_done,
        seed: cfg.run.seed,
        episodes: n,
        gamma,
        reward: summary.reward,
        cost: summary.cost,
        discounted_reward: summary.discounted_reward,
        discounted_cost: summary.discounted_cost,
        per_episode: summary
            .episodes
            .iter()
            .map(|t| EpisodeSummary {
                reward: t.reward,
                cost: t.cost,
                discounted_reward: t.discounted_reward,
                discounted_cost: t.discounted_cost,
            })
            .collect(),
    };
    fs::write(
        dir.join("eval.json"),
        serde_json::to_string_pretty(&report)? + "\n",
    )
    .with_context(|| format!("writing {}", dir.display()))?;
    write_trace(&dir.join("trace.csv"), &summary.episodes[0].records)?;

    println!("episodes          {n}");
    println!("mean reward       {:.4}", summary.reward);
    println!("mean cost         {:.6}", summary.cost);
    println!("discounted reward {:.4}", summary.discounted_reward);
    println!("discounted cost   {:.6}", summary.discounted_cost);
    println!("wrote {}", dir.display());
    Ok(())
}

use std::fs::{self, File};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::agent::{Agent, AgentConfig, Algorithm};
use super::buffer::{ReplayBuffer, Transition};
use crate::environment::{Environment, IcesModel, StepRecord, ACTION_DIM};
use crate::error::{Error, Result};
use crate::neural::{AdamState, Mlp};

/// One row of `metrics.csv`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMetrics {
    pub episode: usize,
    pub cumulative_reward: f64,
    pub cumulative_cost: f64,
    pub cost_e: f64,
    pub cost_g: f64,
    pub cost_h: f64,
    pub lambda: f64,
    /// Mean negated actor objective over the episode's actor steps.
    pub actor_loss: Option<f64>,
    pub critic_loss_r: Option<f64>,
    pub critic_loss_c: Option<f64>,
    pub chp_power: f64,
    pub chp_heat: f64,
    pub chp_cost: f64,
    pub exploration_noise: f64,
}

fn mean(values: &[f64]) -> Option<f64> {
    (!values.is_empty()).then(|| values.iter().sum::<f64>() / values.len() as f64)
}

/// Agent, environment, and replay state of one training run.
#[derive(Debug, Clone)]
pub struct Trainer {
    pub agent: Agent,
    pub env: Environment,
    pub buffer: ReplayBuffer,
    pub episodes_done: usize,
    pub total_episodes: usize,
    explore_rng: ChaCha8Rng,
    sample_rng: ChaCha8Rng,
}

fn stream(seed: u64, id: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(id);
    rng
}

impl Trainer {
    pub fn new(
        model: IcesModel,
        config: AgentConfig,
        seed: u64,
        total_episodes: usize,
    ) -> Result<Self> {
        let state_dim = model.state_dim();
        let buffer = ReplayBuffer::new(config.buffer_capacity)?;
        let agent = Agent::new(config, state_dim, ACTION_DIM, seed)?;
        let mut env = Environment::new(model, seed);
        env.set_rng(stream(seed, 2));
        Ok(Self {
            agent,
            env,
            buffer,
            episodes_done: 0,
            total_episodes,
            explore_rng: stream(seed, 3),
            sample_rng: stream(seed, 4),
        })
    }

    /// Exploration std for a zero-based episode: linear decay from the
    /// initial to the final value over the first half of training.
    pub fn exploration_std(&self, episode: usize) -> f64 {
        let c = &self.agent.config;
        let half = self.total_episodes as f64 / 2.0;
        let frac = if half <= 0.0 {
            1.0
        } else {
            (episode as f64 / half).min(1.0)
        };
        c.exploration_noise + frac * (c.exploration_noise_final - c.exploration_noise)
    }

    fn with_episode(&self, err: Error) -> Error {
        match err {
            Error::TrainingFault { step, message, .. } => Error::TrainingFault {
                episode: self.episodes_done + 1,
                step,
                message,
            },
            other => other,
        }
    }

    pub fn run_episode(&mut self) -> Result<EpisodeMetrics> {
        self.run_episode_inner().map_err(|e| self.with_episode(e))
    }

    fn run_episode_inner(&mut self) -> Result<EpisodeMetrics> {
        let std = self.exploration_std(self.episodes_done);
        let normal = Normal::new(0.0, std).map_err(|e| Error::config(e.to_string()))?;
        let mut state = self.env.reset();
        self.agent.initial_state = Some(state.clone());
        let mut m = EpisodeMetrics {
            episode: self.episodes_done + 1,
            cumulative_reward: 0.0,
            cumulative_cost: 0.0,
            cost_e: 0.0,
            cost_g: 0.0,
            cost_h: 0.0,
            lambda: self.agent.lambda,
            actor_loss: None,
            critic_loss_r: None,
            critic_loss_c: None,
            chp_power: 0.0,
            chp_heat: 0.0,
            chp_cost: 0.0,
            exploration_noise: std,
        };
        let (mut actor, mut loss_r, mut loss_c) = (vec![], vec![], vec![]);
        loop {
            let mut action = self.agent.act(&state)?;
            if action.iter().any(|a| !a.is_finite()) {
                return Err(Error::TrainingFault {
                    episode: 0,
                    step: self.agent.updates as usize,
                    message: "actor produced a non-finite action".into(),
                });
            }
            for a in &mut action {
                *a = (*a + normal.sample(&mut self.explore_rng)).clamp(-1.0, 1.0);
            }
            let out = self.env.step(&action)?;
            let r = &out.hour.record;
            m.cumulative_reward += out.reward;
            m.cumulative_cost += out.cost;
            m.cost_e += r.cost_e;
            m.cost_g += r.cost_g;
            m.cost_h += r.cost_h;
            m.chp_power += r.chp_p;
            m.chp_heat += r.chp_h;
            m.chp_cost += r.chp_cost;
            self.buffer.push(Transition {
                state: std::mem::take(&mut state),
                action,
                reward: out.reward,
                cost: out.cost,
                next_state: out.next_state.clone(),
                terminal: out.terminal,
            });
            if self.buffer.len() >= self.agent.config.replay_start {
                let batch = self
                    .buffer
                    .sample(self.agent.config.batch_size, &mut self.sample_rng)?;
                let info = self.agent.learn(&batch)?;
                loss_r.push(info.critic_loss_r);
                loss_c.push(info.critic_loss_c);
                if let Some(j) = info.actor_objective {
                    actor.push(-j);
                }
            }
            state = out.next_state;
            if out.terminal {
                break;
            }
        }
        self.agent.observe_episode_cost(m.cumulative_cost);
        m.lambda = self.agent.lambda;
        m.actor_loss = mean(&actor);
        m.critic_loss_r = mean(&loss_r);
        m.critic_loss_c = mean(&loss_c);
        self.episodes_done += 1;
        Ok(m)
    }

    pub fn checkpoint(&self) -> Checkpoint {
        Checkpoint::capture(self)
    }
}

/// Serialized position of a ChaCha stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RngState {
    pub seed: [u8; 32],
    pub stream: u64,
    /// Decimal word position.
    pub word_pos: String,
}

impl RngState {
    fn capture(rng: &ChaCha8Rng) -> Self {
        Self {
            seed: rng.get_seed(),
            stream: rng.get_stream(),
            word_pos: rng.get_word_pos().to_string(),
        }
    }

    fn restore(&self) -> Result<ChaCha8Rng> {
        let mut rng = ChaCha8Rng::from_seed(self.seed);
        rng.set_stream(self.stream);
        let pos = self
            .word_pos
            .parse::<u128>()
            .map_err(|e| Error::Checkpoint(format!("bad rng position {:?}: {e}", self.word_pos)))?;
        rng.set_word_pos(pos);
        Ok(rng)
    }
}

pub const CHECKPOINT_FORMAT: &str = "ices-agent";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Complete agent state plus the run's random streams.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Checkpoint {
    pub format: String,
    pub version: u32,
    pub episodes_done: usize,
    pub config: AgentConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub lambda: f64,
    pub updates: u64,
    pub recent_costs: Vec<f64>,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub reward_critics: [Mlp; 2],
    pub reward_targets: [Mlp; 2],
    pub cost_critics: [Mlp; 2],
    pub cost_targets: [Mlp; 2],
    pub actor_opt: AdamState,
    pub reward_opts: [AdamState; 2],
    pub cost_opts: [AdamState; 2],
    pub rng_target_noise: RngState,
    pub rng_environment: RngState,
    pub rng_exploration: RngState,
    pub rng_replay: RngState,
}

impl Checkpoint {
    fn capture(t: &Trainer) -> Self {
        let a = &t.agent;
        Self {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            episodes_done: t.episodes_done,
            config: a.config.clone(),
            state_dim: a.state_dim,
            action_dim: a.action_dim,
            lambda: a.lambda,
            updates: a.updates,
            recent_costs: a.recent_costs.clone(),
            actor: a.actor.clone(),
            actor_target: a.actor_target.clone(),
            reward_critics: a.reward_critics.clone(),
            reward_targets: a.reward_targets.clone(),
            cost_critics: a.cost_critics.clone(),
            cost_targets: a.cost_targets.clone(),
            actor_opt: a.actor_opt.clone(),
            reward_opts: a.reward_opts.clone(),
            cost_opts: a.cost_opts.clone(),
            rng_target_noise: RngState::capture(&a.noise_rng),
            rng_environment: RngState::capture(t.env.rng()),
            rng_exploration: RngState::capture(&t.explore_rng),
            rng_replay: RngState::capture(&t.sample_rng),
        }
    }

    /// Rebuilds the agent. Replay contents are not part of a checkpoint.
    pub fn agent(&self) -> Result<Agent> {
        self.config.validate()?;
        let actor_ok =
            self.actor.input_dim() == self.state_dim && self.actor.output_dim() == self.action_dim;
        let critics_ok = self
            .reward_critics
            .iter()
            .chain(&self.cost_critics)
            .all(|c| c.input_dim() == self.state_dim + self.action_dim && c.output_dim() == 1);
        if !actor_ok || !critics_ok {
            return Err(Error::Checkpoint(
                "network shapes disagree with the recorded dimensions".into(),
            ));
        }
        Ok(Agent {
            config: self.config.clone(),
            state_dim: self.state_dim,
            action_dim: self.action_dim,
            actor: self.actor.clone(),
            actor_target: self.actor_target.clone(),
            reward_critics: self.reward_critics.clone(),
            reward_targets: self.reward_targets.clone(),
            cost_critics: self.cost_critics.clone(),
            cost_targets: self.cost_targets.clone(),
            actor_opt: self.actor_opt.clone(),
            reward_opts: self.reward_opts.clone(),
            cost_opts: self.cost_opts.clone(),
            lambda: self.lambda,
            updates: self.updates,
            initial_state: None,
            recent_costs: self.recent_costs.clone(),
            noise_rng: self.rng_target_noise.restore()?,
        })
    }

    /// Restores a trainer on `model`; the replay buffer starts empty.
    pub fn trainer(&self, model: IcesModel, total_episodes: usize) -> Result<Trainer> {
        if model.state_dim() != self.state_dim {
            return Err(Error::Checkpoint(format!(
                "checkpoint expects state dimension {}, model has {}",
                self.state_dim,
                model.state_dim()
            )));
        }
        let mut env = Environment::new(model, 0);
        env.set_rng(self.rng_environment.restore()?);
        Ok(Trainer {
            agent: self.agent()?,
            env,
            buffer: ReplayBuffer::new(self.config.buffer_capacity)?,
            episodes_done: self.episodes_done,
            total_episodes,
            explore_rng: self.rng_exploration.restore()?,
            sample_rng: self.rng_replay.restore()?,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let json = serde_json::to_string(self).map_err(|e| Error::Checkpoint(e.to_string()))?;
        fs::write(path, json).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn parse(text: &str) -> Result<Self> {
        #[derive(Deserialize)]
        struct Header {
            format: String,
            version: u32,
        }
        let header: Header = serde_json::from_str(text)
            .map_err(|e| Error::Checkpoint(format!("unreadable header: {e}")))?;
        if header.format != CHECKPOINT_FORMAT {
            return Err(Error::Checkpoint(format!(
                "not an agent checkpoint (format {:?})",
                header.format
            )));
        }
        if header.version != CHECKPOINT_VERSION {
            return Err(Error::Checkpoint(format!(
                "checkpoint version {} is not supported (expected {CHECKPOINT_VERSION})",
                header.version
            )));
        }
        serde_json::from_str(text).map_err(|e| Error::Checkpoint(e.to_string()))
    }
}

/// Where a run writes its files.
#[derive(Debug, Clone, PartialEq)]
pub struct RunFiles {
    pub dir: PathBuf,
    /// Also keep `checkpoint_<episode>.json` every this many episodes.
    pub checkpoint_every: Option<usize>,
}

impl RunFiles {
    pub fn metrics(&self) -> PathBuf {
        self.dir.join("metrics.csv")
    }

    pub fn timing(&self) -> PathBuf {
        self.dir.join("timing.csv")
    }

    pub fn final_checkpoint(&self) -> PathBuf {
        self.dir.join("checkpoint.json")
    }

    pub fn fault_checkpoint(&self) -> PathBuf {
        self.dir.join("fault_checkpoint.json")
    }
}

struct CsvOut {
    path: PathBuf,
    writer: csv::Writer<File>,
}

impl CsvOut {
    /// Header taken from the first serialized row.
    fn create(path: PathBuf) -> Result<Self> {
        Self::open(path, true)
    }

    /// Header written up front, so an empty table still has one.
    fn with_header(path: PathBuf, fields: &[&str]) -> Result<Self> {
        let mut out = Self::open(path, false)?;
        out.header(fields)?;
        Ok(out)
    }

    fn open(path: PathBuf, auto_header: bool) -> Result<Self> {
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        Ok(Self {
            writer: csv::WriterBuilder::new()
                .has_headers(auto_header)
                .from_writer(file),
            path,
        })
    }

    fn row<T: Serialize>(&mut self, row: &T) -> Result<()> {
        self.writer
            .serialize(row)
            .map_err(|e| Error::io(&self.path, std::io::Error::other(e)))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }

    fn header(&mut self, fields: &[&str]) -> Result<()> {
        self.writer
            .write_record(fields)
            .map_err(|e| Error::io(&self.path, std::io::Error::other(e)))?;
        self.writer.flush().map_err(|e| Error::io(&self.path, e))
    }
}

pub const METRICS_HEADER: [&str; 14] = [
    "episode",
    "cumulative_reward",
    "cumulative_cost",
    "cost_e",
    "cost_g",
    "cost_h",
    "lambda",
    "actor_loss",
    "critic_loss_r",
    "critic_loss_c",
    "chp_power",
    "chp_heat",
    "chp_cost",
    "exploration_noise",
];

#[derive(Serialize)]
struct TimingRow {
    episode: usize,
    wall_ms: u128,
}

#[derive(Debug, Clone)]
pub struct TrainOutput {
    pub metrics: Vec<EpisodeMetrics>,
    pub wall_ms: Vec<u128>,
    pub trainer: Trainer,
}

/// Runs `episodes` episodes from a fresh agent. With `files`, writes the
/// metrics table, a wall-clock table, and checkpoints; a training fault
/// leaves a checkpoint of the state just before the failing episode.
pub fn train(
    model: &IcesModel,
    config: &AgentConfig,
    seed: u64,
    episodes: usize,
    files: Option<&RunFiles>,
) -> Result<TrainOutput> {
    let trainer = Trainer::new(model.clone(), config.clone(), seed, episodes)?;
    continue_training(trainer, episodes, files)
}

/// As [`train`], with the reward replaced by `r - penalty * c`.
pub fn train_penalty_baseline(
    model: &IcesModel,
    config: &AgentConfig,
    penalty: f64,
    seed: u64,
    episodes: usize,
    files: Option<&RunFiles>,
) -> Result<TrainOutput> {
    let config = AgentConfig {
        algorithm: Algorithm::Td3Penalty,
        penalty,
        ..config.clone()
    };
    train(model, &config, seed, episodes, files)
}

/// Runs the trainer until it has completed `until` episodes in total.
pub fn continue_training(
    trainer: Trainer,
    until: usize,
    files: Option<&RunFiles>,
) -> Result<TrainOutput> {
    continue_training_with(trainer, until, files, |_| {})
}

/// As [`continue_training`], calling `on_episode` after each episode.
pub fn continue_training_with<F>(
    mut trainer: Trainer,
    until: usize,
    files: Option<&RunFiles>,
    mut on_episode: F,
) -> Result<TrainOutput>
where
    F: FnMut(&EpisodeMetrics),
{
    let mut outputs = match files {
        Some(f) => {
            let metrics = CsvOut::with_header(f.metrics(), &METRICS_HEADER)?;
            let timing = CsvOut::with_header(f.timing(), &["episode", "wall_ms"])?;
            Some((f, metrics, timing))
        }
        None => None,
    };
    let mut metrics = Vec::with_capacity(until.saturating_sub(trainer.episodes_done));
    let mut wall = Vec::with_capacity(metrics.capacity());
    while trainer.episodes_done < until {
        let before = outputs.as_ref().map(|_| trainer.checkpoint());
        let start = Instant::now();
        let m = match trainer.run_episode() {
            Ok(m) => m,
            Err(e) => {
                if let (Some((f, _, _)), Some(cp)) = (&outputs, before) {
                    cp.save(&f.fault_checkpoint())?;
                }
                return Err(e);
            }
        };
        let ms = start.elapsed().as_millis();
        if let Some((f, metrics_out, timing_out)) = &mut outputs {
            metrics_out.row(&m)?;
            timing_out.row(&TimingRow {
                episode: m.episode,
                wall_ms: ms,
            })?;
            if f.checkpoint_every
                .is_some_and(|k| k > 0 && m.episode % k == 0)
            {
                trainer
                    .checkpoint()
                    .save(&f.dir.join(format!("checkpoint_{}.json", m.episode)))?;
            }
        }
        on_episode(&m);
        metrics.push(m);
        wall.push(ms);
    }
    if let Some((f, _, _)) = &outputs {
        trainer.checkpoint().save(&f.final_checkpoint())?;
    }
    Ok(TrainOutput {
        metrics,
        wall_ms: wall,
        trainer,
    })
}

/// `sum_t gamma^t x_t`.
pub fn discounted_sum(values: &[f64], gamma: f64) -> f64 {
    values.iter().rev().fold(0.0, |acc, v| v + gamma * acc)
}

#[derive(Debug, Clone, PartialEq)]
pub struct EpisodeTrace {
    pub reward: f64,
    pub cost: f64,
    pub discounted_reward: f64,
    pub discounted_cost: f64,
    pub records: Vec<StepRecord>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct EvalSummary {
    pub discounted_reward: f64,
    pub discounted_cost: f64,
    pub reward: f64,
    pub cost: f64,
    pub episodes: Vec<EpisodeTrace>,
}

/// Noise-free rollouts of the deterministic policy.
pub fn evaluate(
    env: &mut Environment,
    agent: &Agent,
    episodes: usize,
    gamma: f64,
) -> Result<EvalSummary> {
    evaluate_policy(env, episodes, gamma, |s| agent.act(s))
}

/// Rollouts of an arbitrary raw-action policy.
pub fn evaluate_policy<F>(
    env: &mut Environment,
    episodes: usize,
    gamma: f64,
    mut policy: F,
) -> Result<EvalSummary>
where
    F: FnMut(&[f64]) -> Result<Vec<f64>>,
{
    let mut traces = Vec::with_capacity(episodes);
    for _ in 0..episodes {
        let mut state = env.reset();
        let (mut rewards, mut costs, mut records) = (vec![], vec![], vec![]);
        loop {
            let out = env.step(&policy(&state)?)?;
            rewards.push(out.reward);
            costs.push(out.cost);
            records.push(out.hour.record);
            state = out.next_state;
            if out.terminal {
                break;
            }
        }
        traces.push(EpisodeTrace {
            reward: rewards.iter().sum(),
            cost: costs.iter().sum(),
            discounted_reward: discounted_sum(&rewards, gamma),
            discounted_cost: discounted_sum(&costs, gamma),
            records,
        });
    }
    let n = episodes.max(1) as f64;
    let avg = |f: fn(&EpisodeTrace) -> f64| traces.iter().map(f).sum::<f64>() / n;
    Ok(EvalSummary {
        discounted_reward: avg(|t| t.discounted_reward),
        discounted_cost: avg(|t| t.discounted_cost),
        reward: avg(|t| t.reward),
        cost: avg(|t| t.cost),
        episodes: traces,
    })
}

/// Writes per-hour records as CSV.
pub fn write_trace(path: &Path, records: &[StepRecord]) -> Result<()> {
    let mut out = CsvOut::create(path.to_path_buf())?;
    for r in records {
        out.row(r)?;
    }
    out.writer.flush().map_err(|e| Error::io(path, e))?;
    let mut file = out
        .writer
        .into_inner()
        .map_err(|e| Error::io(path, e.into_error()))?;
    file.flush().map_err(|e| Error::io(path, e))
}

/// Reads a metrics table written by [`train`].
pub fn read_metrics(path: &Path) -> Result<Vec<EpisodeMetrics>> {
    let mut reader =
        csv::Reader::from_path(path).map_err(|e| Error::io(path, std::io::Error::other(e)))?;
    reader
        .deserialize()
        .enumerate()
        .map(|(i, row)| {
            row.map_err(|e| Error::data(path.display().to_string(), i + 2, e.to_string()))
        })
        .collect()
}

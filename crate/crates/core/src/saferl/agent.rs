use ndarray::{concatenate, s, Array1, Array2, ArrayView2, Axis, Zip};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::buffer::Batch;
use crate::error::{Error, Result};
use crate::neural::{mse, Activation, AdamState, Gradients, Mlp};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Algorithm {
    /// Primal-dual TD3 with a learned Lagrange multiplier.
    #[default]
    PdTd3,
    /// TD3 on the penalized reward `r - penalty * c`.
    Td3Penalty,
}

impl std::fmt::Display for Algorithm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Algorithm::PdTd3 => "pd-td3",
            Algorithm::Td3Penalty => "td3-penalty",
        })
    }
}

impl std::str::FromStr for Algorithm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pd-td3" => Ok(Algorithm::PdTd3),
            "td3-penalty" => Ok(Algorithm::Td3Penalty),
            other => Err(Error::config(format!(
                "unknown algorithm {other:?}; expected pd-td3 or td3-penalty"
            ))),
        }
    }
}

/// Which quantity is compared against the cost limit in the multiplier step.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum CostEstimate {
    /// Mean cumulative cost of the most recent training episodes.
    #[default]
    Rollout,
    /// Target cost critics at the first state of the episode.
    InitialState,
    /// Batch mean of the target cost critics at the smoothed next action.
    NextStateBatch,
    /// Batch mean of the online cost critic at the current state and policy
    /// action.
    CurrentStateBatch,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AgentConfig {
    pub algorithm: Algorithm,
    /// Fixed multiplier of the penalty baseline, in raw reward per unit cost.
    pub penalty: f64,
    pub hidden: Vec<usize>,
    pub actor_lr: f64,
    pub critic_lr: f64,
    pub gamma: f64,
    /// Discount the cost critics with `gamma` instead of summing the episode.
    pub discounted_cost: bool,
    pub soft_update: f64,
    pub batch_size: usize,
    pub buffer_capacity: usize,
    pub replay_start: usize,
    pub policy_delay: usize,
    pub target_noise: f64,
    pub target_noise_clip: f64,
    pub exploration_noise: f64,
    pub exploration_noise_final: f64,
    pub multiplier_lr: f64,
    pub multiplier_init: f64,
    pub multiplier_max: f64,
    pub cost_limit: f64,
    pub cost_estimate: CostEstimate,
    /// Episodes averaged by [`CostEstimate::Rollout`].
    pub cost_window: usize,
    /// Applied to rewards before they reach the critics.
    pub reward_scale: f64,
    /// Initial scale of the actor's last layer.
    pub actor_output_scale: f64,
}

impl Default for AgentConfig {
    fn default() -> Self {
        Self {
            algorithm: Algorithm::PdTd3,
            penalty: 1.0,
            hidden: vec![128, 32],
            actor_lr: 4e-4,
            critic_lr: 7e-4,
            gamma: 0.99,
            discounted_cost: false,
            soft_update: 1e-3,
            batch_size: 128,
            buffer_capacity: 1_000_000,
            replay_start: 128,
            policy_delay: 2,
            target_noise: 0.2,
            target_noise_clip: 0.5,
            exploration_noise: 0.1,
            exploration_noise_final: 0.02,
            multiplier_lr: 0.025,
            multiplier_init: 0.0,
            multiplier_max: 1e3,
            cost_limit: 10.0,
            cost_estimate: CostEstimate::Rollout,
            cost_window: 1,
            reward_scale: 1e-3,
            actor_output_scale: 1e-2,
        }
    }
}

impl AgentConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("actor_lr", self.actor_lr),
            ("critic_lr", self.critic_lr),
            ("reward_scale", self.reward_scale),
            ("actor_output_scale", self.actor_output_scale),
        ];
        for (name, v) in positive {
            if !(v.is_finite() && v > 0.0) {
                return Err(Error::config(format!("{name} must be positive, got {v}")));
            }
        }
        let nonneg = [
            ("penalty", self.penalty),
            ("target_noise", self.target_noise),
            ("target_noise_clip", self.target_noise_clip),
            ("exploration_noise", self.exploration_noise),
            ("exploration_noise_final", self.exploration_noise_final),
            ("multiplier_lr", self.multiplier_lr),
            ("multiplier_init", self.multiplier_init),
            ("multiplier_max", self.multiplier_max),
            ("cost_limit", self.cost_limit),
        ];
        for (name, v) in nonneg {
            if !(v.is_finite() && v >= 0.0) {
                return Err(Error::config(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        if !(0.0..=1.0).contains(&self.gamma) {
            return Err(Error::config(format!(
                "gamma must lie in [0, 1], got {}",
                self.gamma
            )));
        }
        if !(0.0..=1.0).contains(&self.soft_update) {
            return Err(Error::config(format!(
                "soft_update must lie in [0, 1], got {}",
                self.soft_update
            )));
        }
        if self.batch_size == 0 || self.policy_delay == 0 || self.cost_window == 0 {
            return Err(Error::config(
                "batch_size, policy_delay, and cost_window must be positive",
            ));
        }
        if self.replay_start < self.batch_size {
            return Err(Error::config("replay_start must be at least batch_size"));
        }
        if self.buffer_capacity < self.replay_start {
            return Err(Error::config(
                "buffer_capacity must be at least replay_start",
            ));
        }
        if self.hidden.is_empty() || self.hidden.contains(&0) {
            return Err(Error::config(
                "hidden layer sizes must be non-empty and positive",
            ));
        }
        if self.multiplier_init > self.multiplier_max {
            return Err(Error::config("multiplier_init exceeds multiplier_max"));
        }
        Ok(())
    }

    pub fn cost_gamma(&self) -> f64 {
        if self.discounted_cost {
            self.gamma
        } else {
            1.0
        }
    }
}

/// Bootstrapped critic targets and the target-critic values behind them.
#[derive(Debug, Clone, PartialEq)]
pub struct Targets {
    pub y: Array1<f64>,
    pub z: Array1<f64>,
    /// Training reward the targets were built from.
    pub rewards: Array1<f64>,
    pub q_r: [Array1<f64>; 2],
    pub q_c: [Array1<f64>; 2],
}

/// What one call to [`Agent::learn`] did.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct UpdateInfo {
    pub critic_loss_r: f64,
    pub critic_loss_c: f64,
    /// Actor objective before the step; `None` off the delay cadence.
    pub actor_objective: Option<f64>,
    pub cost_estimate: Option<f64>,
    pub lambda: f64,
}

/// Actor, twin reward critics, twin cost critics, their targets and
/// optimizers, and the Lagrange multiplier.
#[derive(Debug, Clone)]
pub struct Agent {
    pub config: AgentConfig,
    pub state_dim: usize,
    pub action_dim: usize,
    pub actor: Mlp,
    pub actor_target: Mlp,
    pub reward_critics: [Mlp; 2],
    pub reward_targets: [Mlp; 2],
    pub cost_critics: [Mlp; 2],
    pub cost_targets: [Mlp; 2],
    pub actor_opt: AdamState,
    pub reward_opts: [AdamState; 2],
    pub cost_opts: [AdamState; 2],
    pub lambda: f64,
    /// Number of completed `learn` calls.
    pub updates: u64,
    /// First observation of an episode, used by [`CostEstimate::InitialState`].
    pub initial_state: Option<Vec<f64>>,
    /// Recent episode costs, used by [`CostEstimate::Rollout`].
    pub recent_costs: Vec<f64>,
    pub noise_rng: ChaCha8Rng,
}

fn fault(step: u64, message: impl Into<String>) -> Error {
    Error::TrainingFault {
        episode: 0,
        step: step as usize,
        message: message.into(),
    }
}

/// `[x]^+` projection of one dual ascent step, capped at `max`.
pub fn multiplier_step(
    lambda: f64,
    step_size: f64,
    estimated_cost: f64,
    limit: f64,
    max: f64,
) -> f64 {
    (lambda + step_size * (estimated_cost - limit)).clamp(0.0, max)
}

/// Adds clipped noise to target actions and clips the result to `[-1, 1]`.
pub fn smooth_actions(mut actions: Array2<f64>, noise: &Array2<f64>, clip: f64) -> Array2<f64> {
    Zip::from(&mut actions)
        .and(noise)
        .for_each(|a, &n| *a = (*a + n.clamp(-clip, clip)).clamp(-1.0, 1.0));
    actions
}

fn critic_input(states: ArrayView2<f64>, actions: ArrayView2<f64>) -> Array2<f64> {
    concatenate(Axis(1), &[states, actions]).expect("batch rows agree")
}

fn column(a: Array2<f64>) -> Array1<f64> {
    a.column(0).to_owned()
}

impl Agent {
    pub fn new(
        config: AgentConfig,
        state_dim: usize,
        action_dim: usize,
        seed: u64,
    ) -> Result<Self> {
        config.validate()?;
        let mut init = ChaCha8Rng::seed_from_u64(seed);
        let mut actor_dims = vec![state_dim];
        actor_dims.extend(&config.hidden);
        actor_dims.push(action_dim);
        let mut critic_dims = vec![state_dim + action_dim];
        critic_dims.extend(&config.hidden);
        critic_dims.push(1);

        let actor = Mlp::new(
            &actor_dims,
            Activation::Tanh,
            Activation::Tanh,
            config.actor_output_scale,
            &mut init,
        )?;
        let mut critic = || {
            Mlp::new(
                &critic_dims,
                Activation::Relu,
                Activation::Identity,
                1.0,
                &mut init,
            )
        };
        let reward_critics = [critic()?, critic()?];
        let cost_critics = [critic()?, critic()?];

        let actor_opt = AdamState::new(&actor, config.actor_lr);
        let opt = |n: &Mlp| AdamState::new(n, config.critic_lr);
        let reward_opts = [opt(&reward_critics[0]), opt(&reward_critics[1])];
        let cost_opts = [opt(&cost_critics[0]), opt(&cost_critics[1])];
        let mut noise_rng = ChaCha8Rng::seed_from_u64(seed);
        noise_rng.set_stream(1);
        let lambda = match config.algorithm {
            Algorithm::PdTd3 => config.multiplier_init,
            Algorithm::Td3Penalty => config.penalty,
        };
        Ok(Self {
            actor_target: actor.clone(),
            reward_targets: reward_critics.clone(),
            cost_targets: cost_critics.clone(),
            actor,
            reward_critics,
            cost_critics,
            actor_opt,
            reward_opts,
            cost_opts,
            lambda,
            updates: 0,
            initial_state: None,
            recent_costs: Vec::new(),
            noise_rng,
            state_dim,
            action_dim,
            config,
        })
    }

    /// Deterministic policy action in `[-1, 1]`.
    pub fn act(&self, state: &[f64]) -> Result<Vec<f64>> {
        self.actor.forward(state)
    }

    /// Reward the critics learn from: the raw reward for the primal-dual
    /// agent, the penalized reward for the baseline, both scaled.
    pub fn training_rewards(&self, batch: &Batch) -> Array1<f64> {
        let scale = self.config.reward_scale;
        match self.config.algorithm {
            Algorithm::PdTd3 => &batch.rewards * scale,
            Algorithm::Td3Penalty => {
                (&batch.rewards - &(&batch.costs * self.config.penalty)) * scale
            }
        }
    }

    /// Target actor output at `next_states` plus clipped Gaussian noise.
    pub fn smoothed_target_action(&mut self, next_states: ArrayView2<f64>) -> Result<Array2<f64>> {
        let actions = self.actor_target.forward_batch(next_states)?;
        if self.config.target_noise == 0.0 {
            return Ok(actions);
        }
        let normal =
            Normal::new(0.0, self.config.target_noise).map_err(|e| Error::config(e.to_string()))?;
        let noise =
            Array2::from_shape_simple_fn(actions.raw_dim(), || normal.sample(&mut self.noise_rng));
        Ok(smooth_actions(
            actions,
            &noise,
            self.config.target_noise_clip,
        ))
    }

    pub fn compute_targets(&mut self, batch: &Batch) -> Result<Targets> {
        let next_actions = self.smoothed_target_action(batch.next_states.view())?;
        let x = critic_input(batch.next_states.view(), next_actions.view());
        let q_r = [
            column(self.reward_targets[0].forward_batch(x.view())?),
            column(self.reward_targets[1].forward_batch(x.view())?),
        ];
        let q_c = [
            column(self.cost_targets[0].forward_batch(x.view())?),
            column(self.cost_targets[1].forward_batch(x.view())?),
        ];
        let rewards = self.training_rewards(batch);
        let (g, gc) = (self.config.gamma, self.config.cost_gamma());
        let mut y = rewards.clone();
        let mut z = batch.costs.clone();
        for i in 0..batch.len() {
            let live = 1.0 - batch.terminal[i];
            y[i] += g * live * q_r[0][i].min(q_r[1][i]);
            z[i] += gc * live * q_c[0][i].min(q_c[1][i]);
        }
        Ok(Targets {
            y,
            z,
            rewards,
            q_r,
            q_c,
        })
    }

    /// One Adam step on each online critic; returns the mean pre-step losses
    /// of the reward pair and the cost pair.
    pub fn update_critics(&mut self, batch: &Batch, targets: &Targets) -> Result<(f64, f64)> {
        let x = critic_input(batch.states.view(), batch.actions.view());
        let mut losses = [0.0; 4];
        for j in 0..2 {
            let (l, g) = self.reward_critics[j].grad(x.view(), |out| mse(out, &targets.y))?;
            self.apply_critic(l, &g, "reward critic")?;
            self.reward_opts[j].step(&mut self.reward_critics[j], &g)?;
            losses[j] = l;
            let (l, g) = self.cost_critics[j].grad(x.view(), |out| mse(out, &targets.z))?;
            self.apply_critic(l, &g, "cost critic")?;
            self.cost_opts[j].step(&mut self.cost_critics[j], &g)?;
            losses[2 + j] = l;
        }
        Ok(((losses[0] + losses[1]) / 2.0, (losses[2] + losses[3]) / 2.0))
    }

    fn apply_critic(&self, loss: f64, grads: &Gradients, name: &str) -> Result<()> {
        if !loss.is_finite() || !grads.is_finite() {
            return Err(fault(
                self.updates,
                format!("non-finite {name} loss {loss}"),
            ));
        }
        Ok(())
    }

    /// Weight of the cost critic inside the actor objective. The reward
    /// critic sees scaled reward, so lambda is brought to the same scale.
    fn actor_cost_weight(&self) -> f64 {
        match self.config.algorithm {
            Algorithm::PdTd3 => self.lambda * self.config.reward_scale,
            Algorithm::Td3Penalty => 0.0,
        }
    }

    /// Actor objective `mean[Q_R1(s, mu(s)) - lambda * Q_C1(s, mu(s))]` and
    /// the gradient of its negation with respect to the actor parameters.
    pub fn actor_objective_grad(&self, states: ArrayView2<f64>) -> Result<(f64, Gradients)> {
        let n = states.nrows() as f64;
        let weight = self.actor_cost_weight();
        let trace = self.actor.forward_trace(states)?;
        let x = critic_input(states, trace.output().view());

        let r_trace = self.reward_critics[0].forward_trace(x.view())?;
        let mut objective = r_trace.output().sum() / n;
        let d_r = Array2::from_elem((states.nrows(), 1), -1.0 / n);
        let (_, mut d_x) = self.reward_critics[0].backward(&r_trace, d_r.view());

        if weight != 0.0 {
            let c_trace = self.cost_critics[0].forward_trace(x.view())?;
            objective -= weight * c_trace.output().sum() / n;
            let d_c = Array2::from_elem((states.nrows(), 1), weight / n);
            let (_, d_xc) = self.cost_critics[0].backward(&c_trace, d_c.view());
            d_x += &d_xc;
        }
        let d_action = d_x.slice(s![.., self.state_dim..]);
        let (grads, _) = self.actor.backward(&trace, d_action);
        Ok((objective, grads))
    }

    /// One ascent step on the actor objective; critics are untouched.
    pub fn update_actor(&mut self, states: ArrayView2<f64>) -> Result<f64> {
        let (objective, grads) = self.actor_objective_grad(states)?;
        if !objective.is_finite() || !grads.is_finite() {
            return Err(fault(
                self.updates,
                format!("non-finite actor objective {objective}"),
            ));
        }
        self.actor_opt.step(&mut self.actor, &grads)?;
        Ok(objective)
    }

    /// Estimated constraint value for the multiplier step, or `None` when
    /// the configured source has nothing to evaluate.
    pub fn estimate_cost(&self, batch: &Batch) -> Result<Option<f64>> {
        let min_target = |x: &Array2<f64>| -> Result<Array1<f64>> {
            let a = column(self.cost_targets[0].forward_batch(x.view())?);
            let b = column(self.cost_targets[1].forward_batch(x.view())?);
            Ok(Zip::from(&a).and(&b).map_collect(|&a, &b| a.min(b)))
        };
        match self.config.cost_estimate {
            CostEstimate::Rollout => Ok((!self.recent_costs.is_empty())
                .then(|| self.recent_costs.iter().sum::<f64>() / self.recent_costs.len() as f64)),
            CostEstimate::InitialState => {
                let Some(s0) = &self.initial_state else {
                    return Ok(None);
                };
                let s0 = ArrayView2::from_shape((1, s0.len()), s0)
                    .map_err(|e| Error::config(e.to_string()))?;
                let a0 = self.actor_target.forward_batch(s0)?;
                Ok(Some(min_target(&critic_input(s0, a0.view()))?[0]))
            }
            CostEstimate::NextStateBatch => {
                let live: Vec<usize> = (0..batch.len())
                    .filter(|&i| batch.terminal[i] == 0.0)
                    .collect();
                if live.is_empty() {
                    return Ok(None);
                }
                let states = batch.next_states.select(Axis(0), &live);
                let actions = self.actor_target.forward_batch(states.view())?;
                Ok(min_target(&critic_input(states.view(), actions.view()))?.mean())
            }
            CostEstimate::CurrentStateBatch => {
                let actions = self.actor.forward_batch(batch.states.view())?;
                let x = critic_input(batch.states.view(), actions.view());
                Ok(column(self.cost_critics[0].forward_batch(x.view())?).mean())
            }
        }
    }

    /// Records a finished episode's cumulative cost.
    pub fn observe_episode_cost(&mut self, cost: f64) {
        self.recent_costs.push(cost);
        let excess = self
            .recent_costs
            .len()
            .saturating_sub(self.config.cost_window);
        self.recent_costs.drain(..excess);
    }

    /// Projected dual ascent on the multiplier.
    pub fn update_multiplier(&mut self, estimated_cost: f64) -> f64 {
        let c = &self.config;
        self.lambda = multiplier_step(
            self.lambda,
            c.multiplier_lr,
            estimated_cost,
            c.cost_limit,
            c.multiplier_max,
        );
        self.lambda
    }

    pub fn soft_update_targets(&mut self) -> Result<()> {
        let rho = self.config.soft_update;
        self.actor_target.soft_update(&self.actor, rho)?;
        for j in 0..2 {
            self.reward_targets[j].soft_update(&self.reward_critics[j], rho)?;
            self.cost_targets[j].soft_update(&self.cost_critics[j], rho)?;
        }
        Ok(())
    }

    /// Whether the next `learn` call also updates actor, multiplier, and
    /// targets.
    pub fn next_update_is_delayed_step(&self) -> bool {
        (self.updates + 1) % self.config.policy_delay as u64 == 0
    }

    /// One training iteration on a sampled batch: critics always; actor,
    /// multiplier, and targets every `policy_delay` iterations.
    pub fn learn(&mut self, batch: &Batch) -> Result<UpdateInfo> {
        let delayed = self.next_update_is_delayed_step();
        let targets = self.compute_targets(batch)?;
        let (critic_loss_r, critic_loss_c) = self.update_critics(batch, &targets)?;
        let mut info = UpdateInfo {
            critic_loss_r,
            critic_loss_c,
            actor_objective: None,
            cost_estimate: None,
            lambda: self.lambda,
        };
        if delayed {
            info.actor_objective = Some(self.update_actor(batch.states.view())?);
            if self.config.algorithm == Algorithm::PdTd3 {
                info.cost_estimate = self.estimate_cost(batch)?;
                if let Some(c) = info.cost_estimate {
                    if !c.is_finite() {
                        return Err(fault(self.updates, format!("non-finite cost estimate {c}")));
                    }
                    info.lambda = self.update_multiplier(c);
                }
            }
            self.soft_update_targets()?;
        }
        self.updates += 1;
        Ok(info)
    }
}

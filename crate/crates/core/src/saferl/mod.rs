//! Primal-dual TD3 for the constrained problem, the fixed-penalty TD3
//! baseline, replay, training, and evaluation.

mod agent;
mod buffer;
pub mod report;
mod train;

pub use agent::{
    multiplier_step, smooth_actions, Agent, AgentConfig, Algorithm, CostEstimate, Targets,
    UpdateInfo,
};
pub use buffer::{Batch, ReplayBuffer, Transition};
pub use train::{
    continue_training, continue_training_with, discounted_sum, evaluate, evaluate_policy,
    read_metrics, train, train_penalty_baseline, write_trace, Checkpoint, EpisodeMetrics,
    EpisodeTrace, EvalSummary, RngState, RunFiles, TrainOutput, Trainer, CHECKPOINT_FORMAT,
    CHECKPOINT_VERSION, METRICS_HEADER,
};

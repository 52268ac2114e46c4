//! Run configuration shared by every entry point: one TOML file with
//! `[run]`, `[sweep]`, `[env]` and `[agent]` tables.

use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::assets;
use crate::environment::{DayData, EnvConfig, IcesModel};
use crate::error::{Error, Result};
use crate::networks::TopologySpec;
use crate::saferl::{AgentConfig, Algorithm};

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct IcesConfig {
    pub run: RunSection,
    pub sweep: SweepSection,
    pub env: EnvConfig,
    pub agent: AgentConfig,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunSection {
    pub episodes: usize,
    pub seed: u64,
    /// Seeds for multi-seed commands (sweep, ablate-chp).
    pub seeds: Vec<u64>,
    /// Day-data CSV; the shipped sample day when absent.
    pub day: Option<PathBuf>,
    /// Network topology file; the shipped topology when absent.
    pub topology: Option<PathBuf>,
    pub out: PathBuf,
    /// Keep a numbered checkpoint every this many episodes (0 disables).
    pub checkpoint_every: usize,
    pub eval_episodes: usize,
    /// Parallel workers for multi-run commands.
    pub workers: usize,
}

impl Default for RunSection {
    fn default() -> Self {
        Self {
            episodes: 300,
            seed: 1,
            seeds: vec![1, 2, 3],
            day: None,
            topology: None,
            out: PathBuf::from("runs/default"),
            checkpoint_every: 100,
            eval_episodes: 10,
            workers: 1,
        }
    }
}

/// Hyperparameter a sweep varies.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepParameter {
    /// Fixed multiplier of the penalty baseline; forces that algorithm.
    Penalty,
    ActorLr,
    CriticLr,
    MultiplierLr,
    CostLimit,
}

impl SweepParameter {
    pub const ALL: [SweepParameter; 5] = [
        SweepParameter::Penalty,
        SweepParameter::ActorLr,
        SweepParameter::CriticLr,
        SweepParameter::MultiplierLr,
        SweepParameter::CostLimit,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SweepParameter::Penalty => "penalty",
            SweepParameter::ActorLr => "actor_lr",
            SweepParameter::CriticLr => "critic_lr",
            SweepParameter::MultiplierLr => "multiplier_lr",
            SweepParameter::CostLimit => "cost_limit",
        }
    }

    /// `agent` with this parameter set to `value`.
    pub fn apply(self, agent: &AgentConfig, value: f64) -> AgentConfig {
        let mut a = agent.clone();
        match self {
            SweepParameter::Penalty => {
                a.algorithm = Algorithm::Td3Penalty;
                a.penalty = value;
            }
            SweepParameter::ActorLr => a.actor_lr = value,
            SweepParameter::CriticLr => a.critic_lr = value,
            SweepParameter::MultiplierLr => a.multiplier_lr = value,
            SweepParameter::CostLimit => a.cost_limit = value,
        }
        a
    }
}

impl fmt::Display for SweepParameter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepParameter {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        let key = s.replace('-', "_");
        Self::ALL
            .into_iter()
            .find(|p| p.name() == key)
            .ok_or_else(|| {
                let names: Vec<_> = Self::ALL.iter().map(|p| p.name()).collect();
                Error::config(format!(
                    "unknown sweep parameter `{s}` (expected one of {})",
                    names.join(", ")
                ))
            })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub parameter: SweepParameter,
    pub values: Vec<f64>,
}

impl Default for SweepSection {
    fn default() -> Self {
        Self {
            parameter: SweepParameter::Penalty,
            values: vec![1.0, 10.0, 100.0, 1000.0],
        }
    }
}

impl IcesConfig {
    pub fn parse(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).map_err(|e| Error::config(e.to_string()))?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|e| Error::config(format!("{}: {e}", path.display())))
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.env.validate()?;
        self.agent.validate()?;
        if self.run.workers == 0 {
            return Err(Error::config("run.workers must be at least 1"));
        }
        if self.sweep.values.iter().any(|v| !v.is_finite()) {
            return Err(Error::config("sweep.values must be finite"));
        }
        for path in [&self.run.day, &self.run.topology].into_iter().flatten() {
            if !path.is_file() {
                return Err(Error::config(format!("{} does not exist", path.display())));
            }
        }
        Ok(())
    }

    /// Raw bytes of the day data, from `run.day` or the shipped sample.
    pub fn day_text(&self) -> Result<String> {
        match &self.run.day {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
            None => Ok(assets::SAMPLE_DAY.to_string()),
        }
    }

    /// Raw text of the topology, from `run.topology` or the shipped file.
    pub fn topology_text(&self) -> Result<String> {
        match &self.run.topology {
            Some(p) => std::fs::read_to_string(p).map_err(|e| Error::io(p, e)),
            None => Ok(assets::TOPOLOGY.to_string()),
        }
    }

    pub fn model(&self) -> Result<IcesModel> {
        let source = self
            .run
            .day
            .as_ref()
            .map_or_else(|| "sample_day.csv".to_string(), |p| p.display().to_string());
        let day = DayData::from_reader(self.day_text()?.as_bytes(), &source)?;
        let topology = TopologySpec::parse(&self.topology_text()?)?;
        IcesModel::new(self.env.clone(), day, &topology)
    }
}

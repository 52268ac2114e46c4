//! Data files shipped with the crate.

use crate::environment::{DayData, EnvConfig, IcesModel};
use crate::error::Result;
use crate::networks::TopologySpec;

pub const TOPOLOGY: &str = include_str!("../../../data/topology.toml");
pub const SAMPLE_DAY: &str = include_str!("../../../data/sample_day.csv");

pub fn topology() -> Result<TopologySpec> {
    TopologySpec::parse(TOPOLOGY)
}

pub fn sample_day() -> Result<DayData> {
    DayData::from_reader(SAMPLE_DAY.as_bytes(), "sample_day.csv")
}

/// Model on the shipped topology and sample day.
pub fn sample_model(config: EnvConfig) -> Result<IcesModel> {
    IcesModel::new(config, sample_day()?, &topology()?)
}

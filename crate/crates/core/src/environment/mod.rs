//! The constrained MDP: one day of hourly operation combining devices, users,
//! and networks. Reward is operator profit; cost is network violation.

mod config;
mod day;
mod model;

pub use config::{
    chp_gas_input, ChpConfig, ChpPlant, EnvConfig, MeuConfig, Penalties, PenaltyConfig,
    PriceBounds, SimplifiedChp,
};
pub use day::{load_day, DayData, DayRow, HOURS};
pub use model::{
    meu_schedule, Action, Environment, HourOutcome, IcesModel, ImbalanceRecord, StateScaling,
    StepOutcome, StepRecord, ACTION_DIM, AUGMENTED_STATE_DIM, BASE_STATE_DIM,
};

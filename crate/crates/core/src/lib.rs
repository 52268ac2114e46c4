//! Integrated community energy system: device, consumer, and network models,
//! a 24-hour constrained MDP built from them, and primal-dual TD3 training.

pub mod assets;
pub mod config;
pub mod consumers;
pub mod devices;
pub mod environment;
pub mod error;
pub mod networks;
pub mod neural;
pub mod saferl;

pub use error::{Error, Result};

//! Steady-state electricity, gas, and heat network models and the
//! standardized constraint-violation cost.

mod electric;
mod gas;
mod heat;
mod topology;
mod tree;
mod violation;

pub use electric::{solve_distflow, DistflowState, ElectricLine, ElectricNet};
pub use gas::{
    downstream_pressure, solve_gasflow, weymouth_flow, GasNet, GasNode, GasPipe, GasflowState,
};
pub use heat::{
    mass_flow, solve_heatflow, HeatNet, HeatNode, HeatPipe, HeatflowState, TemperatureProfile,
};
pub use topology::{
    Connections, ElectricSpec, GasSpec, HeatSpec, NetworkOutcome, NetworkSet, NodalLoads,
    TopologySpec,
};
pub use violation::{violation_cost, Violation, ViolationKind, ViolationReport};

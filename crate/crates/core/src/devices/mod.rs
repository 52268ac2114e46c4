//! Physical device models: CHP, wind, PV, and storage.

mod chp;
mod renewables;
mod storage;

pub use chp::{
    ChpCostCoeffs, ChpUnit, ConvexSection, FeasibleRegion, FixedRatioRegion, OperatingRegion,
    Point, FEASIBILITY_TOL,
};
pub use renewables::{der_output, PvModel, RampForm, WindModel};
pub use storage::{StorageFlow, StorageUnit};

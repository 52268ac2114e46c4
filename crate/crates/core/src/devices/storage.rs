use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Battery or thermal store with standing loss and one-way charging
/// efficiency. One step is one hour, so MW and MWh are interchangeable.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StorageUnit {
    pub energy: f64,
    pub loss_factor: f64,
    pub charge_eff: f64,
    pub max_power: f64,
    pub e_min: f64,
    pub e_max: f64,
}

/// Powers actually applied after clamping; at most one is nonzero.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct StorageFlow {
    pub charge: f64,
    pub discharge: f64,
}

impl StorageFlow {
    /// Net power delivered to the system (discharge minus charge).
    pub fn net_output(&self) -> f64 {
        self.discharge - self.charge
    }
}

impl StorageUnit {
    pub fn validate(&self) -> Result<()> {
        let ok = (0.0..1.0).contains(&self.loss_factor)
            && self.charge_eff > 0.0
            && self.charge_eff <= 1.0
            && self.max_power >= 0.0
            && 0.0 <= self.e_min
            && self.e_min <= self.e_max
            && (self.e_min..=self.e_max).contains(&self.energy);
        if ok {
            Ok(())
        } else {
            Err(Error::config("storage parameters out of range"))
        }
    }

    pub fn state_of_charge(&self) -> f64 {
        if self.e_max > self.e_min {
            (self.energy - self.e_min) / (self.e_max - self.e_min)
        } else {
            0.0
        }
    }

    /// Advance one interval. Simultaneous commands are resolved by net
    /// intent (the larger wins, a tie goes to charging); the winner is capped
    /// by `max_power` and by the energy bounds. Charging headroom is measured
    /// before standing losses, so a full store accepts nothing. Standing losses
    /// never take the store below `e_min`.
    pub fn step(&self, charge: f64, discharge: f64) -> (StorageUnit, StorageFlow) {
        let charge = if charge.is_finite() {
            charge.max(0.0)
        } else {
            0.0
        };
        let discharge = if discharge.is_finite() {
            discharge.max(0.0)
        } else {
            0.0
        };
        let retained = (1.0 - self.loss_factor) * self.energy;

        let mut flow = StorageFlow::default();
        if charge > 0.0 && charge >= discharge {
            let headroom = ((self.e_max - self.energy) / self.charge_eff).max(0.0);
            flow.charge = charge.min(self.max_power).min(headroom);
        } else if discharge > 0.0 {
            let available = (retained - self.e_min).max(0.0);
            flow.discharge = discharge.min(self.max_power).min(available);
        }

        let energy = (retained + flow.charge * self.charge_eff - flow.discharge)
            .clamp(self.e_min, self.e_max);
        let next = StorageUnit {
            energy,
            ..self.clone()
        };
        (next, flow)
    }
}

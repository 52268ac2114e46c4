use rand::Rng;
use rand_distr::{Beta, Distribution, Weibull};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Shape of the power curve between cut-in and rated speed.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RampForm {
    /// `(w + w_in) / (w_rated + w_in)`, which jumps at cut-in.
    #[default]
    AsPrinted,
    /// `(w - w_in) / (w_rated - w_in)`, continuous at cut-in.
    Conventional,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindModel {
    /// m/s
    pub cut_in: f64,
    pub rated_speed: f64,
    pub cut_out: f64,
    /// MW
    pub rated_power: f64,
    pub weibull_shape: f64,
    pub weibull_scale: f64,
    #[serde(default)]
    pub ramp: RampForm,
}

impl WindModel {
    pub fn validate(&self) -> Result<()> {
        let ok = 0.0 < self.cut_in
            && self.cut_in < self.rated_speed
            && self.rated_speed < self.cut_out
            && self.rated_power > 0.0
            && self.weibull_shape > 0.0
            && self.weibull_scale > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config("wind model parameters out of range"))
        }
    }

    fn ramp_fraction(&self, speed: f64) -> f64 {
        match self.ramp {
            RampForm::AsPrinted => (speed + self.cut_in) / (self.rated_speed + self.cut_in),
            RampForm::Conventional => (speed - self.cut_in) / (self.rated_speed - self.cut_in),
        }
    }

    /// Power output in MW at wind speed `speed` (m/s).
    pub fn power(&self, speed: f64) -> f64 {
        if speed <= self.cut_in || speed >= self.cut_out {
            0.0
        } else if speed >= self.rated_speed {
            self.rated_power
        } else {
            self.rated_power * self.ramp_fraction(speed)
        }
    }

    /// Wind speed that produces `power` on the ramp; used to turn a power
    /// forecast back into a speed before adding the speed error. Powers the
    /// curve cannot produce map to the nearest attainable speed.
    pub fn speed_for_power(&self, power: f64) -> f64 {
        if power <= 0.0 {
            return 0.0;
        }
        if power >= self.rated_power {
            return self.rated_speed;
        }
        let frac = power / self.rated_power;
        let speed = match self.ramp {
            RampForm::AsPrinted => frac * (self.rated_speed + self.cut_in) - self.cut_in,
            RampForm::Conventional => self.cut_in + frac * (self.rated_speed - self.cut_in),
        };
        speed.clamp(self.cut_in, self.rated_speed)
    }

    /// Speed forecast error: Weibull(k, lambda) shifted by -0.5 m/s.
    pub fn sample_error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let dist = Weibull::new(self.weibull_scale, self.weibull_shape)
            .expect("validated Weibull parameters");
        dist.sample(rng) - 0.5
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PvModel {
    /// m^2 per unit
    pub panel_area: f64,
    pub efficiency: f64,
    pub unit_count: u32,
    pub beta_alpha: f64,
    pub beta_beta: f64,
}

impl PvModel {
    pub fn validate(&self) -> Result<()> {
        let ok = self.panel_area > 0.0
            && self.efficiency > 0.0
            && self.efficiency <= 1.0
            && self.beta_alpha > 0.0
            && self.beta_beta > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::config("PV model parameters out of range"))
        }
    }

    /// MW per kW/m^2 of irradiance over all units.
    fn mw_per_irradiance(&self) -> f64 {
        self.unit_count as f64 * self.efficiency * self.panel_area / 1000.0
    }

    /// Power in MW for irradiance in kW/m^2.
    pub fn power(&self, irradiance: f64) -> f64 {
        self.mw_per_irradiance() * irradiance.max(0.0)
    }

    pub fn installed_capacity(&self) -> f64 {
        self.mw_per_irradiance()
    }

    pub fn irradiance_for_power(&self, power: f64) -> f64 {
        let k = self.mw_per_irradiance();
        if k <= 0.0 {
            0.0
        } else {
            power.max(0.0) / k
        }
    }

    /// Irradiance forecast error: Beta(alpha, beta) shifted by -0.5, so the
    /// support is [-0.5, 0.5] kW/m^2.
    pub fn sample_error<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        let dist = Beta::new(self.beta_alpha, self.beta_beta).expect("validated Beta parameters");
        dist.sample(rng) - 0.5
    }
}

/// Total distributed generation.
pub fn der_output(p_pv: f64, p_wt: f64) -> f64 {
    p_pv + p_wt
}

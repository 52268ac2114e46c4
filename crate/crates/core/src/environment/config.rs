use serde::{Deserialize, Serialize};

use crate::consumers::MeuProfile;
use crate::devices::{
    ChpCostCoeffs, ChpUnit, FeasibleRegion, FixedRatioRegion, OperatingRegion, Point, PvModel,
    RampForm, StorageUnit, WindModel,
};
use crate::error::{Error, Result};

/// Physical and economic parameters of the environment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EnvConfig {
    pub chp: ChpConfig,
    pub wind: WindModel,
    pub pv: PvModel,
    pub battery: StorageUnit,
    pub thermal: StorageUnit,
    pub prices: PriceBounds,
    pub penalties: PenaltyConfig,
    pub meus: MeuConfig,
    /// Adds hour index and both states of charge to the observation.
    pub augment_state: bool,
    /// Replaces the polygonal operating region with a fixed conversion line.
    pub simplified_chp: bool,
    /// Counts line capacity excesses in the violation cost.
    pub include_line_limits: bool,
    /// Drops the CHP operating cost from the reward and bills CHP fuel at the
    /// wholesale gas price instead.
    pub literal_reward: bool,
    /// Draw renewable forecast errors; off makes every step deterministic.
    pub renewable_noise: bool,
    /// Wholesale gas import limit, MW. Unlimited when absent.
    pub gas_import_cap: Option<f64>,
}

impl Default for EnvConfig {
    fn default() -> Self {
        Self {
            chp: ChpConfig::default(),
            wind: WindModel {
                cut_in: 3.0,
                rated_speed: 12.0,
                cut_out: 22.0,
                rated_power: 2.0,
                weibull_shape: 2.0,
                weibull_scale: 1.0,
                ramp: RampForm::AsPrinted,
            },
            pv: PvModel {
                panel_area: 500.0,
                efficiency: 0.15,
                unit_count: 20,
                beta_alpha: 2.0,
                beta_beta: 2.0,
            },
            battery: StorageUnit {
                energy: 1.5,
                loss_factor: 0.01,
                charge_eff: 0.96,
                max_power: 0.5,
                e_min: 0.3,
                e_max: 2.7,
            },
            thermal: StorageUnit {
                energy: 0.94,
                loss_factor: 0.02,
                charge_eff: 0.96,
                max_power: 0.7,
                e_min: 0.2,
                e_max: 1.68,
            },
            prices: PriceBounds::default(),
            penalties: PenaltyConfig::default(),
            meus: MeuConfig::default(),
            augment_state: false,
            simplified_chp: false,
            include_line_limits: false,
            literal_reward: false,
            renewable_noise: true,
            gas_import_cap: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ChpConfig {
    /// `[P, H]` corners of the operating region, MW and MWt.
    pub corners: Vec<[f64; 2]>,
    pub cost: ChpCostCoeffs,
    pub big_m: f64,
    /// Scaled power setpoint above which the unit is committed, MW.
    pub commit_threshold: f64,
    /// Fuel-to-output efficiency of the detailed model.
    pub total_efficiency: f64,
    pub simplified: SimplifiedChp,
}

impl Default for ChpConfig {
    fn default() -> Self {
        Self {
            corners: vec![
                [24.0, 0.0],
                [24.0, 8.0],
                [10.0, 32.0],
                [45.0, 55.0],
                [60.0, 16.0],
                [60.0, 0.0],
            ],
            cost: ChpCostCoeffs {
                a: 0.0435,
                b: 36.0,
                c: 1250.0,
                d: 0.027,
                e: 0.6,
                f: 0.011,
            },
            big_m: 1e4,
            commit_threshold: 1.0,
            total_efficiency: 0.8,
            simplified: SimplifiedChp::default(),
        }
    }
}

/// Fixed conversion line used by the simplified model. The heat efficiency
/// follows from matching the detailed region's maximum outputs.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SimplifiedChp {
    pub eta_power: f64,
    /// MW
    pub min_power: f64,
}

impl Default for SimplifiedChp {
    fn default() -> Self {
        Self {
            eta_power: 0.35,
            min_power: 10.0,
        }
    }
}

/// CHP unit plus the fuel model that goes with its region.
#[derive(Debug, Clone, PartialEq)]
pub struct ChpPlant {
    pub unit: ChpUnit,
    pub commit_threshold: f64,
    /// Bounding box of the detailed region; raw setpoints are scaled onto it.
    pub setpoint_box: Point,
    fuel: FuelModel,
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum FuelModel {
    Total(f64),
    PowerOnly(f64),
}

impl ChpPlant {
    pub fn from_config(cfg: &ChpConfig, simplified: bool) -> Result<Self> {
        let corners: Vec<Point> = cfg.corners.iter().map(|c| Point::new(c[0], c[1])).collect();
        let detailed = FeasibleRegion::from_corners(&corners)?;
        let setpoint_box = detailed.max_output();
        if !(cfg.total_efficiency > 0.0 && cfg.total_efficiency <= 1.0)
            || cfg.commit_threshold < 0.0
        {
            return Err(Error::config(
                "CHP efficiency must lie in (0, 1] and the commit threshold must be nonnegative",
            ));
        }
        let (region, fuel) = if simplified {
            let line = FixedRatioRegion::matching_box(
                cfg.simplified.eta_power,
                setpoint_box,
                cfg.simplified.min_power,
            )?;
            (
                OperatingRegion::Simplified(line),
                FuelModel::PowerOnly(line.eta_power),
            )
        } else {
            (
                OperatingRegion::Detailed(detailed),
                FuelModel::Total(cfg.total_efficiency),
            )
        };
        let mut unit = ChpUnit::new(region, cfg.cost)?;
        unit.big_m = cfg.big_m;
        Ok(Self {
            unit,
            commit_threshold: cfg.commit_threshold,
            setpoint_box,
            fuel,
        })
    }

    /// Gas power drawn to produce `(p, h)`, MW.
    pub fn gas_input(&self, p: f64, h: f64) -> f64 {
        match self.fuel {
            FuelModel::Total(eta) => chp_gas_input(p, h, eta),
            FuelModel::PowerOnly(eta) => p / eta,
        }
    }
}

/// Gas input of the detailed CHP at total efficiency `eta_total`.
pub fn chp_gas_input(p: f64, h: f64, eta_total: f64) -> f64 {
    (p + h) / eta_total
}

/// Retail price ranges, `[min, max]` in currency per MW.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PriceBounds {
    pub electricity: [f64; 2],
    pub gas: [f64; 2],
    pub heat: [f64; 2],
}

impl Default for PriceBounds {
    fn default() -> Self {
        Self {
            electricity: [0.0, 50.0],
            gas: [0.0, 50.0],
            heat: [0.0, 40.0],
        }
    }
}

impl PriceBounds {
    pub fn validate(&self) -> Result<()> {
        for [lo, hi] in [self.electricity, self.gas, self.heat] {
            if !(0.0 <= lo && lo < hi) {
                return Err(Error::config("price bounds must satisfy 0 <= min < max"));
            }
        }
        Ok(())
    }
}

/// Imbalance penalties. Unset entries default to `multiplier` times the
/// highest wholesale electricity price, the highest wholesale gas price, and
/// the upper retail heat price.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PenaltyConfig {
    pub multiplier: f64,
    pub delta_e: Option<f64>,
    pub delta_g: Option<f64>,
    pub delta_h: Option<f64>,
}

impl Default for PenaltyConfig {
    fn default() -> Self {
        Self {
            multiplier: 2.0,
            delta_e: None,
            delta_g: None,
            delta_h: None,
        }
    }
}

/// Resolved per-MW imbalance penalties.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Penalties {
    pub delta_e: f64,
    pub delta_g: f64,
    pub delta_h: f64,
}

impl PenaltyConfig {
    pub fn resolve(&self, max_x_we: f64, max_x_wg: f64, prices: &PriceBounds) -> Result<Penalties> {
        let p = Penalties {
            delta_e: self.delta_e.unwrap_or(self.multiplier * max_x_we),
            delta_g: self.delta_g.unwrap_or(self.multiplier * max_x_wg),
            delta_h: self.delta_h.unwrap_or(self.multiplier * prices.heat[1]),
        };
        if p.delta_e > 0.0 && p.delta_g > 0.0 && p.delta_h > 0.0 {
            Ok(p)
        } else {
            Err(Error::config("imbalance penalties must be positive"))
        }
    }
}

/// User population: a base profile, hourly shapes for the linear utility
/// terms, and a seeded per-user perturbation.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct MeuConfig {
    pub count: usize,
    pub seed: u64,
    /// Relative half-width of the uniform per-user factor on each coefficient.
    pub perturbation: f64,
    pub base: MeuProfile,
    /// Hourly multipliers on `omega`.
    pub electric_shape: Vec<f64>,
    /// Hourly multipliers on `zeta`.
    pub heat_shape: Vec<f64>,
}

impl Default for MeuConfig {
    fn default() -> Self {
        Self {
            count: 5,
            seed: 2023,
            perturbation: 0.2,
            base: MeuProfile {
                omega: 80.0,
                lambda: 6.0,
                sigma: 1.0,
                zeta: 50.0,
                eta_eb: 0.95,
                eta_gb: 0.9,
                p_e_max: 10.0,
                p_eb_max: 2.0,
                p_gb_max: 2.0,
                h_direct_max: None,
            },
            electric_shape: vec![
                0.80, 0.78, 0.76, 0.76, 0.78, 0.84, 0.92, 1.02, 1.08, 1.06, 1.00, 0.96, 0.94, 0.94,
                0.96, 1.00, 1.06, 1.14, 1.18, 1.18, 1.14, 1.06, 0.96, 0.86,
            ],
            heat_shape: vec![
                1.10, 1.10, 1.12, 1.12, 1.12, 1.10, 1.06, 1.00, 0.94, 0.88, 0.84, 0.80, 0.78, 0.78,
                0.80, 0.84, 0.90, 0.98, 1.06, 1.12, 1.14, 1.14, 1.12, 1.10,
            ],
        }
    }
}

impl EnvConfig {
    pub fn validate(&self) -> Result<()> {
        self.wind.validate()?;
        self.pv.validate()?;
        self.battery.validate()?;
        self.thermal.validate()?;
        self.prices.validate()?;
        self.meus.base.validate()?;
        let m = &self.meus;
        if m.count == 0 || !(0.0..1.0).contains(&m.perturbation) {
            return Err(Error::config(
                "meus: count must be positive and perturbation within [0, 1)",
            ));
        }
        if m.electric_shape.len() != 24 || m.heat_shape.len() != 24 {
            return Err(Error::config("meus: hourly shapes need 24 entries"));
        }
        if m.electric_shape
            .iter()
            .chain(&m.heat_shape)
            .any(|v| !(*v >= 0.0))
        {
            return Err(Error::config("meus: hourly shapes must be nonnegative"));
        }
        if self.gas_import_cap.is_some_and(|cap| !(cap >= 0.0)) {
            return Err(Error::config("gas_import_cap must be nonnegative"));
        }
        ChpPlant::from_config(&self.chp, self.simplified_chp)?;
        Ok(())
    }
}

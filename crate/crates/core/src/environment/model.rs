use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::config::{ChpPlant, EnvConfig, Penalties};
use super::day::{DayData, HOURS};
use crate::consumers::{solve_response, MeuProfile, MeuResponse, RetailPrices};
use crate::devices::{StorageFlow, StorageUnit};
use crate::error::{Error, Result};
use crate::networks::{NetworkOutcome, NetworkSet, NodalLoads, TopologySpec};

pub const ACTION_DIM: usize = 9;
pub const BASE_STATE_DIM: usize = 4;
pub const AUGMENTED_STATE_DIM: usize = 7;

/// Physical action after scaling and projection.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct Action {
    pub x_e: f64,
    pub x_g: f64,
    pub x_h: f64,
    pub chp_on: bool,
    pub chp_p: f64,
    pub chp_h: f64,
    pub battery_charge: f64,
    pub battery_discharge: f64,
    pub thermal_charge: f64,
    pub thermal_discharge: f64,
}

impl Action {
    pub fn prices(&self) -> RetailPrices {
        RetailPrices::new(self.x_e, self.x_g, self.x_h)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct ImbalanceRecord {
    /// Signed residual of the electricity balance; negative is surplus.
    pub p_imb_e: f64,
    pub p_imb_g: f64,
    /// Signed residual of the heat balance.
    pub h_imb: f64,
    pub delta_e: f64,
    pub delta_g: f64,
    pub delta_h: f64,
}

impl ImbalanceRecord {
    pub fn cost(&self) -> f64 {
        self.delta_e * self.p_imb_e.abs()
            + self.delta_g * self.p_imb_g.abs()
            + self.delta_h * self.h_imb.abs()
    }
}

/// Everything that happened in one hour; one row of an evaluation trace.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct StepRecord {
    pub hour: usize,
    pub x_e: f64,
    pub x_g: f64,
    pub x_h: f64,
    pub chp_on: bool,
    pub chp_p: f64,
    pub chp_h: f64,
    pub chp_cost: f64,
    pub chp_gas: f64,
    pub wt: f64,
    pub pv: f64,
    pub battery_charge: f64,
    pub battery_discharge: f64,
    pub battery_energy: f64,
    pub thermal_charge: f64,
    pub thermal_discharge: f64,
    pub thermal_energy: f64,
    pub meu_p_e: f64,
    pub meu_p_eb: f64,
    pub meu_p_gb: f64,
    pub meu_h_direct: f64,
    pub meu_utility: f64,
    pub wholesale_e: f64,
    pub wholesale_g: f64,
    /// Signed electricity residual; negative is surplus.
    pub p_imb_e: f64,
    pub p_imb_g: f64,
    pub h_imb: f64,
    pub revenue: f64,
    pub wholesale_cost: f64,
    pub imbalance_cost: f64,
    pub reward: f64,
    pub cost: f64,
    pub cost_e: f64,
    pub cost_g: f64,
    pub cost_h: f64,
}

/// Record plus the network inputs and solutions behind its cost.
#[derive(Debug, Clone, PartialEq)]
pub struct HourOutcome {
    pub record: StepRecord,
    pub responses: Vec<MeuResponse>,
    pub loads: NodalLoads,
    pub networks: NetworkOutcome,
    pub battery: StorageUnit,
    pub thermal: StorageUnit,
}

/// Affine map from raw observations onto roughly [-1, 1].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StateScaling {
    pub center: Vec<f64>,
    pub half_range: Vec<f64>,
}

impl StateScaling {
    pub fn apply(&self, raw: &[f64]) -> Vec<f64> {
        raw.iter()
            .zip(self.center.iter().zip(&self.half_range))
            .map(|(x, (c, h))| ((x - c) / h).clamp(-1.0, 1.0))
            .collect()
    }
}

/// Static part of the system: data, devices, users, and networks.
#[derive(Debug, Clone)]
pub struct IcesModel {
    pub config: EnvConfig,
    pub day: DayData,
    pub nets: NetworkSet,
    pub chp: ChpPlant,
    pub penalties: Penalties,
    /// `[hour][meu]`
    pub meus: Vec<Vec<MeuProfile>>,
    pub scaling: StateScaling,
}

fn scale_unit(raw: f64, lo: f64, hi: f64) -> f64 {
    let r = if raw.is_finite() {
        raw.clamp(-1.0, 1.0)
    } else {
        0.0
    };
    lo + (r + 1.0) / 2.0 * (hi - lo)
}

/// Per-user coefficient schedules with a seeded uniform perturbation.
pub fn meu_schedule(cfg: &EnvConfig) -> Result<Vec<Vec<MeuProfile>>> {
    let m = &cfg.meus;
    let mut rng = ChaCha8Rng::seed_from_u64(m.seed);
    let spread = m.perturbation;
    let mut factor = || 1.0 + spread * (2.0 * rng.random::<f64>() - 1.0);
    let factors: Vec<[f64; 4]> = (0..m.count)
        .map(|_| [factor(), factor(), factor(), factor()])
        .collect();
    let mut schedule = Vec::with_capacity(HOURS);
    for hour in 0..HOURS {
        let row = factors
            .iter()
            .map(|f| {
                let p = MeuProfile {
                    omega: m.base.omega * f[0] * m.electric_shape[hour],
                    lambda: m.base.lambda * f[1],
                    sigma: m.base.sigma * f[2],
                    zeta: m.base.zeta * f[3] * m.heat_shape[hour],
                    ..m.base.clone()
                };
                p.validate().map(|_| p)
            })
            .collect::<Result<Vec<_>>>()?;
        schedule.push(row);
    }
    Ok(schedule)
}

impl IcesModel {
    pub fn new(config: EnvConfig, day: DayData, topology: &TopologySpec) -> Result<Self> {
        config.validate()?;
        let nets = topology.build(config.include_line_limits)?;
        if nets.meu_count() != config.meus.count {
            return Err(Error::config(format!(
                "topology maps {} users but the configuration has {}",
                nets.meu_count(),
                config.meus.count
            )));
        }
        let chp = ChpPlant::from_config(&config.chp, config.simplified_chp)?;
        let penalties = config
            .penalties
            .resolve(day.max_x_we(), day.max_x_wg(), &config.prices)?;
        let meus = meu_schedule(&config)?;

        let p = &config.prices;
        let e_span = day.max_x_we().max(p.electricity[1]) / 2.0;
        let g_span = day.max_x_wg().max(p.gas[1]) / 2.0;
        let wt_span = config.wind.rated_power / 2.0;
        let pv_span = config.pv.installed_capacity() / 2.0;
        let mut center = vec![e_span, g_span, wt_span, pv_span];
        let mut half_range = center.clone();
        if config.augment_state {
            center.extend([11.5, 0.5, 0.5]);
            half_range.extend([11.5, 0.5, 0.5]);
        }
        Ok(Self {
            config,
            day,
            nets,
            chp,
            penalties,
            meus,
            scaling: StateScaling { center, half_range },
        })
    }

    pub fn state_dim(&self) -> usize {
        if self.config.augment_state {
            AUGMENTED_STATE_DIM
        } else {
            BASE_STATE_DIM
        }
    }

    /// Raw observation for `hour` (taken modulo the day length).
    pub fn raw_state(&self, hour: usize, battery: &StorageUnit, thermal: &StorageUnit) -> Vec<f64> {
        let r = &self.day.rows()[hour % HOURS];
        let mut s = vec![r.x_we, r.x_wg, r.wt_mw, r.pv_mw];
        if self.config.augment_state {
            s.extend([
                (hour % HOURS) as f64,
                battery.state_of_charge(),
                thermal.state_of_charge(),
            ]);
        }
        s
    }

    pub fn observe(&self, hour: usize, battery: &StorageUnit, thermal: &StorageUnit) -> Vec<f64> {
        self.scaling.apply(&self.raw_state(hour, battery, thermal))
    }

    /// Maps a raw actor output in `[-1, 1]^9` to a physical action.
    pub fn project_action(&self, raw: &[f64]) -> Result<Action> {
        if raw.len() != ACTION_DIM {
            return Err(Error::Dimension {
                expected: ACTION_DIM,
                actual: raw.len(),
            });
        }
        let p = &self.config.prices;
        let bx = self.chp.setpoint_box;
        let p_raw = scale_unit(raw[3], 0.0, bx.p);
        let h_raw = scale_unit(raw[4], 0.0, bx.h);
        let chp_on = p_raw > self.chp.commit_threshold;
        let (chp_p, chp_h) = self.chp.unit.project(p_raw, h_raw, chp_on);
        let (b, t) = (&self.config.battery, &self.config.thermal);
        Ok(Action {
            x_e: scale_unit(raw[0], p.electricity[0], p.electricity[1]),
            x_g: scale_unit(raw[1], p.gas[0], p.gas[1]),
            x_h: scale_unit(raw[2], p.heat[0], p.heat[1]),
            chp_on,
            chp_p,
            chp_h,
            battery_charge: scale_unit(raw[5], 0.0, b.max_power),
            battery_discharge: scale_unit(raw[6], 0.0, b.max_power),
            thermal_charge: scale_unit(raw[7], 0.0, t.max_power),
            thermal_discharge: scale_unit(raw[8], 0.0, t.max_power),
        })
    }

    /// Realized wind and PV output: the forecast perturbed by one draw of
    /// each error distribution, clipped to installed capacity.
    pub fn realize_renewables<R: Rng + ?Sized>(
        &self,
        hour: usize,
        rng: &mut R,
    ) -> Result<(f64, f64)> {
        let row = self.day.row(hour)?;
        let (wind, pv) = (&self.config.wind, &self.config.pv);
        let speed = wind.speed_for_power(row.wt_mw) + wind.sample_error(rng);
        let wt = wind.power(speed.max(0.0)).clamp(0.0, wind.rated_power);
        let irradiance_error = pv.sample_error(rng);
        let pv_out = if row.pv_mw > 0.0 {
            pv.power(pv.irradiance_for_power(row.pv_mw) + irradiance_error)
                .clamp(0.0, pv.installed_capacity())
        } else {
            0.0
        };
        Ok((wt, pv_out))
    }

    /// One hour of operation for a given action, storage state, and realized
    /// renewable output.
    pub fn evaluate_hour(
        &self,
        hour: usize,
        action: &Action,
        battery: &StorageUnit,
        thermal: &StorageUnit,
        wt: f64,
        pv: f64,
    ) -> Result<HourOutcome> {
        let row = *self.day.row(hour)?;
        let meus = &self.meus[hour];
        let prices = action.prices();
        let responses: Vec<MeuResponse> = meus.iter().map(|m| solve_response(m, &prices)).collect();

        let (battery_next, bflow): (StorageUnit, StorageFlow) =
            battery.step(action.battery_charge, action.battery_discharge);
        let (thermal_next, tflow) = thermal.step(action.thermal_charge, action.thermal_discharge);

        let mut unit = self.chp.unit.clone();
        unit.committed = action.chp_on;
        let chp_cost = unit.operating_cost(action.chp_p, action.chp_h);
        let chp_gas = if action.chp_on {
            self.chp.gas_input(action.chp_p, action.chp_h)
        } else {
            0.0
        };

        let sum = |f: fn(&MeuResponse) -> f64| responses.iter().map(f).sum::<f64>();
        let meu_p_e = sum(|r| r.p_e);
        let meu_p_eb = sum(|r| r.p_eb);
        let meu_p_gb = sum(|r| r.p_gb);
        let meu_h_direct = sum(|r| r.h_direct);
        let meu_utility = sum(|r| r.utility);

        let demand_e = meu_p_e + meu_p_eb;
        let local_e = action.chp_p + wt + pv + bflow.net_output();
        let wholesale_e = (demand_e - local_e).max(0.0);
        let p_imb_e = demand_e - local_e - wholesale_e;

        let h_imb = meu_h_direct - action.chp_h - tflow.net_output();

        let demand_g = meu_p_gb + chp_gas;
        let wholesale_g = match self.config.gas_import_cap {
            Some(cap) => demand_g.min(cap),
            None => demand_g,
        };
        let p_imb_g = demand_g - wholesale_g;

        let pen = self.penalties;
        let imbalance = ImbalanceRecord {
            p_imb_e,
            p_imb_g,
            h_imb,
            delta_e: pen.delta_e,
            delta_g: pen.delta_g,
            delta_h: pen.delta_h,
        };
        let revenue =
            prices.electricity * demand_e + prices.gas * meu_p_gb + prices.heat * meu_h_direct;
        let literal = self.config.literal_reward;
        // CHP fuel is already priced inside its operating cost.
        let billed_gas = if literal {
            wholesale_g
        } else {
            (wholesale_g - chp_gas).max(0.0)
        };
        let wholesale_cost = row.x_we * wholesale_e + row.x_wg * billed_gas;
        let imbalance_cost = imbalance.cost();
        let reward =
            revenue - wholesale_cost - imbalance_cost - if literal { 0.0 } else { chp_cost };

        let loads = self.nodal_loads(&responses, action, bflow, wt + pv, chp_gas);
        let networks = self.nets.evaluate(&loads)?;
        let report = &networks.report;

        let record = StepRecord {
            hour,
            x_e: prices.electricity,
            x_g: prices.gas,
            x_h: prices.heat,
            chp_on: action.chp_on,
            chp_p: action.chp_p,
            chp_h: action.chp_h,
            chp_cost,
            chp_gas,
            wt,
            pv,
            battery_charge: bflow.charge,
            battery_discharge: bflow.discharge,
            battery_energy: battery_next.energy,
            thermal_charge: tflow.charge,
            thermal_discharge: tflow.discharge,
            thermal_energy: thermal_next.energy,
            meu_p_e,
            meu_p_eb,
            meu_p_gb,
            meu_h_direct,
            meu_utility,
            wholesale_e,
            wholesale_g,
            p_imb_e,
            p_imb_g,
            h_imb,
            revenue,
            wholesale_cost,
            imbalance_cost,
            reward,
            cost: report.total_cost,
            cost_e: report.electric_cost(),
            cost_g: report.gas_cost(),
            cost_h: report.heat_cost(),
        };
        Ok(HourOutcome {
            record,
            responses,
            loads,
            networks,
            battery: battery_next,
            thermal: thermal_next,
        })
    }

    fn nodal_loads(
        &self,
        responses: &[MeuResponse],
        action: &Action,
        bflow: StorageFlow,
        der: f64,
        chp_gas: f64,
    ) -> NodalLoads {
        let c = &self.nets.connections;
        let mut loads = self.nets.empty_loads();
        for (i, r) in responses.iter().enumerate() {
            let p = r.electricity();
            let bus = &mut loads.electric[c.meu_bus[i]];
            bus.0 += p;
            bus.1 += self.nets.reactive_for(p);
            loads.gas[c.meu_gas_node[i]] += r.p_gb * c.gas_m3_per_mw;
            loads.heat[c.meu_heat_node[i]] += r.h_direct;
        }
        loads.electric[c.der_bus].0 -= der;
        loads.electric[c.battery_bus].0 -= bflow.net_output();
        loads.electric[c.chp_bus].0 -= action.chp_p;
        loads.gas[c.chp_gas_node] += chp_gas * c.gas_m3_per_mw;
        loads
    }
}

/// Result of one environment step.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutcome {
    pub next_state: Vec<f64>,
    /// Unscaled reward.
    pub reward: f64,
    pub cost: f64,
    pub terminal: bool,
    pub hour: HourOutcome,
}

/// Episodic environment: 24 hourly steps over one day.
#[derive(Debug, Clone)]
pub struct Environment {
    model: IcesModel,
    battery: StorageUnit,
    thermal: StorageUnit,
    hour: usize,
    rng: ChaCha8Rng,
}

impl Environment {
    pub fn new(model: IcesModel, seed: u64) -> Self {
        let battery = model.config.battery.clone();
        let thermal = model.config.thermal.clone();
        Self {
            model,
            battery,
            thermal,
            hour: 0,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn model(&self) -> &IcesModel {
        &self.model
    }

    pub fn hour(&self) -> usize {
        self.hour
    }

    pub fn state_dim(&self) -> usize {
        self.model.state_dim()
    }

    pub fn rng(&self) -> &ChaCha8Rng {
        &self.rng
    }

    pub fn set_rng(&mut self, rng: ChaCha8Rng) {
        self.rng = rng;
    }

    /// Restores initial storage levels and returns the first observation.
    pub fn reset(&mut self) -> Vec<f64> {
        self.battery = self.model.config.battery.clone();
        self.thermal = self.model.config.thermal.clone();
        self.hour = 0;
        self.observe()
    }

    pub fn observe(&self) -> Vec<f64> {
        self.model.observe(self.hour, &self.battery, &self.thermal)
    }

    pub fn step(&mut self, raw_action: &[f64]) -> Result<StepOutcome> {
        if self.hour >= HOURS {
            return Err(Error::data(
                "day data",
                self.hour + 1,
                "episode already finished; call reset",
            ));
        }
        let action = self.model.project_action(raw_action)?;
        let (wt, pv) = if self.model.config.renewable_noise {
            self.model.realize_renewables(self.hour, &mut self.rng)?
        } else {
            let row = self.model.day.row(self.hour)?;
            (row.wt_mw, row.pv_mw)
        };
        let outcome =
            self.model
                .evaluate_hour(self.hour, &action, &self.battery, &self.thermal, wt, pv)?;
        self.battery = outcome.battery.clone();
        self.thermal = outcome.thermal.clone();
        self.hour += 1;
        Ok(StepOutcome {
            next_state: self.observe(),
            reward: outcome.record.reward,
            cost: outcome.record.cost,
            terminal: self.hour == HOURS,
            hour: outcome,
        })
    }
}

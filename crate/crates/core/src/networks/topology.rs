use std::path::Path;

use serde::{Deserialize, Serialize};

use super::electric::{solve_distflow, DistflowState, ElectricLine, ElectricNet};
use super::gas::{solve_gasflow, GasNet, GasNode, GasPipe, GasflowState};
use super::heat::{solve_heatflow, HeatNet, HeatPipe, HeatflowState, TemperatureProfile};
use super::violation::{violation_cost, ViolationReport};
use crate::error::{Error, Result};

/// On-disk topology description (TOML).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TopologySpec {
    pub electric: ElectricSpec,
    pub gas: GasSpec,
    pub heat: HeatSpec,
    pub connections: Connections,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ElectricSpec {
    pub bus_count: usize,
    pub root: usize,
    pub root_voltage: f64,
    pub v_min: f64,
    pub v_max: f64,
    /// Nominal line-to-line voltage used to turn ohms into per-unit drops.
    pub base_kv: f64,
    pub line_p_max: f64,
    pub line_q_max: f64,
    /// `[from, to, r_ohm, x_ohm]`
    pub lines: Vec<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GasSpec {
    pub node_count: usize,
    pub root: usize,
    pub pr_min: f64,
    pub pr_max: f64,
    pub consumption_max: f64,
    /// `[node, limit]` pairs overriding `consumption_max`.
    #[serde(default)]
    pub consumption_max_overrides: Vec<(usize, f64)>,
    /// `[from, to, c, flow_max]`
    pub pipes: Vec<(usize, usize, f64, f64)>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct HeatSpec {
    pub node_count: usize,
    pub root: usize,
    pub c_f: f64,
    pub temperatures: TemperatureProfile,
    pub node_flow_min: f64,
    pub node_flow_max: f64,
    /// Nodal flow limit at the source.
    pub source_flow_max: f64,
    /// `[from, to, length_m, flow_max]`
    pub pipes: Vec<(usize, usize, f64, f64)>,
}

/// Where users and devices attach to each network.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Connections {
    pub meu_bus: Vec<usize>,
    pub meu_gas_node: Vec<usize>,
    pub meu_heat_node: Vec<usize>,
    pub chp_bus: usize,
    pub chp_gas_node: usize,
    pub der_bus: usize,
    pub battery_bus: usize,
    /// Power factor of user demand.
    pub power_factor: f64,
    /// Gas volume per MW of gas power.
    pub gas_m3_per_mw: f64,
}

/// The three networks plus the attachment map.
#[derive(Debug, Clone, PartialEq)]
pub struct NetworkSet {
    pub electric: ElectricNet,
    pub gas: GasNet,
    pub heat: HeatNet,
    pub connections: Connections,
    pub include_line_limits: bool,
}

/// Nodal loads handed to the network solvers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NodalLoads {
    /// Net withdrawal per bus, (MW, MVar).
    pub electric: Vec<(f64, f64)>,
    /// Consumption per gas node, m^3/h.
    pub gas: Vec<f64>,
    /// Heat draw per heat node, MWt.
    pub heat: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkOutcome {
    pub electric: DistflowState,
    pub gas: GasflowState,
    pub heat: HeatflowState,
    pub report: ViolationReport,
}

impl TopologySpec {
    pub fn parse(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::config(format!("topology: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn build(&self, include_line_limits: bool) -> Result<NetworkSet> {
        let e = &self.electric;
        if e.base_kv <= 0.0 {
            return Err(Error::config("electric base_kv must be positive"));
        }
        let lines = e
            .lines
            .iter()
            .map(|&(from, to, r, x)| {
                ElectricLine::from_ohms(from, to, r, x, e.base_kv, e.line_p_max, e.line_q_max)
            })
            .collect();
        let electric =
            ElectricNet::new(e.bus_count, e.root, e.root_voltage, e.v_min, e.v_max, lines)?;

        let g = &self.gas;
        let mut nodes = vec![
            GasNode {
                pr_min: g.pr_min,
                pr_max: g.pr_max,
                consumption_max: g.consumption_max,
            };
            g.node_count
        ];
        for &(n, limit) in &g.consumption_max_overrides {
            nodes
                .get_mut(n)
                .ok_or_else(|| Error::config(format!("gas override names missing node {n}")))?
                .consumption_max = limit;
        }
        let pipes = g
            .pipes
            .iter()
            .map(|&(from, to, c, flow_max)| GasPipe {
                from,
                to,
                c,
                flow_max,
            })
            .collect();
        let gas = GasNet::new(g.root, nodes, pipes)?;

        let h = &self.heat;
        let mut bounds = vec![(h.node_flow_min, h.node_flow_max); h.node_count];
        if h.root < h.node_count {
            bounds[h.root] = (0.0, h.source_flow_max);
        }
        let pipes = h
            .pipes
            .iter()
            .map(|&(from, to, length, flow_max)| HeatPipe {
                from,
                to,
                length,
                flow_max,
            })
            .collect();
        let heat = HeatNet::from_lengths(h.root, h.c_f, h.temperatures, &bounds, pipes)?;

        let c = &self.connections;
        let meus = c.meu_bus.len();
        if meus == 0 || c.meu_gas_node.len() != meus || c.meu_heat_node.len() != meus {
            return Err(Error::config(
                "connections must map every MEU to one bus, gas node, and heat node",
            ));
        }
        let bus_ok = |b: usize| b < electric.bus_count;
        let gas_ok = |n: usize| n < gas.node_count();
        let heat_ok = |n: usize| n < heat.node_count() && n != heat.root;
        if !(c.meu_bus.iter().all(|&b| bus_ok(b))
            && c.meu_gas_node.iter().all(|&n| gas_ok(n) && n != gas.root)
            && c.meu_heat_node.iter().all(|&n| heat_ok(n))
            && bus_ok(c.chp_bus)
            && bus_ok(c.der_bus)
            && bus_ok(c.battery_bus)
            && gas_ok(c.chp_gas_node)
            && c.chp_gas_node != gas.root)
        {
            return Err(Error::config(
                "connections reference a missing or reserved node",
            ));
        }
        if !(c.power_factor > 0.0 && c.power_factor <= 1.0 && c.gas_m3_per_mw > 0.0) {
            return Err(Error::config(
                "power_factor must lie in (0, 1] and gas_m3_per_mw must be positive",
            ));
        }

        Ok(NetworkSet {
            electric,
            gas,
            heat,
            connections: c.clone(),
            include_line_limits,
        })
    }
}

impl NetworkSet {
    pub fn meu_count(&self) -> usize {
        self.connections.meu_bus.len()
    }

    pub fn empty_loads(&self) -> NodalLoads {
        NodalLoads {
            electric: vec![(0.0, 0.0); self.electric.bus_count],
            gas: vec![0.0; self.gas.node_count()],
            heat: vec![0.0; self.heat.node_count()],
        }
    }

    /// Reactive demand accompanying `p` MW at the configured power factor.
    pub fn reactive_for(&self, p: f64) -> f64 {
        let pf = self.connections.power_factor;
        p * (1.0 - pf * pf).sqrt() / pf
    }

    pub fn evaluate(&self, loads: &NodalLoads) -> Result<NetworkOutcome> {
        let electric = solve_distflow(&self.electric, &loads.electric)?;
        let gas = solve_gasflow(&self.gas, &loads.gas)?;
        let heat = solve_heatflow(&self.heat, &loads.heat)?;
        let report = violation_cost(
            &self.electric,
            &electric,
            &self.gas,
            &gas,
            &self.heat,
            &heat,
            self.include_line_limits,
        );
        Ok(NetworkOutcome {
            electric,
            gas,
            heat,
            report,
        })
    }
}

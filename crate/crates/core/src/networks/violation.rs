use serde::{Deserialize, Serialize};

use super::electric::{DistflowState, ElectricNet};
use super::gas::{GasNet, GasflowState};
use super::heat::{HeatNet, HeatflowState};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ViolationKind {
    OverVoltage,
    UnderVoltage,
    LineActivePower,
    LineReactivePower,
    GasPipeFlow,
    OverPressure,
    UnderPressure,
    GasConsumption,
    NodalFlowHigh,
    NodalFlowLow,
    HeatPipeFlow,
}

/// One bound exceeded by one network element.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Violation {
    pub kind: ViolationKind,
    /// Bus, node, line, or pipe index.
    pub element: usize,
    pub quantity: f64,
    pub bound: f64,
    /// Normalized positive excess.
    pub excess: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct ViolationReport {
    pub electric: Vec<Violation>,
    pub gas: Vec<Violation>,
    pub heat: Vec<Violation>,
    /// Line capacity excesses; counted in `total_cost` only when enabled.
    pub line_limits: Vec<Violation>,
    pub line_limits_counted: bool,
    pub total_cost: f64,
}

fn sum(list: &[Violation]) -> f64 {
    list.iter().fold(0.0, |acc, v| acc + v.excess)
}

impl ViolationReport {
    pub fn electric_cost(&self) -> f64 {
        sum(&self.electric)
            + if self.line_limits_counted {
                sum(&self.line_limits)
            } else {
                0.0
            }
    }

    pub fn gas_cost(&self) -> f64 {
        sum(&self.gas)
    }

    pub fn heat_cost(&self) -> f64 {
        sum(&self.heat)
    }

    pub fn is_clean(&self) -> bool {
        self.total_cost == 0.0
    }
}

/// Pushes the term `[(quantity - reference) / scale]^+` when positive.
fn check(
    list: &mut Vec<Violation>,
    kind: ViolationKind,
    element: usize,
    over: f64,
    scale: f64,
    quantity: f64,
    bound: f64,
) {
    let excess = over / scale;
    if excess > 0.0 {
        list.push(Violation {
            kind,
            element,
            quantity,
            bound,
            excess,
        });
    }
}

/// Standardized constraint violation of the three solved networks.
pub fn violation_cost(
    electric_net: &ElectricNet,
    electric: &DistflowState,
    gas_net: &GasNet,
    gas: &GasflowState,
    heat_net: &HeatNet,
    heat: &HeatflowState,
    include_line_limits: bool,
) -> ViolationReport {
    use ViolationKind::*;
    let mut r = ViolationReport {
        line_limits_counted: include_line_limits,
        ..Default::default()
    };

    let (v_max, v_min) = (electric_net.v_max, electric_net.v_min);
    for (n, &v) in electric.voltage.iter().enumerate() {
        check(&mut r.electric, OverVoltage, n, v - v_max, v_max, v, v_max);
        check(&mut r.electric, UnderVoltage, n, v_min - v, v_min, v, v_min);
    }
    for (k, line) in electric_net.lines.iter().enumerate() {
        let (p, q) = (electric.p_flow[k].abs(), electric.q_flow[k].abs());
        check(
            &mut r.line_limits,
            LineActivePower,
            k,
            p - line.p_max,
            line.p_max,
            p,
            line.p_max,
        );
        check(
            &mut r.line_limits,
            LineReactivePower,
            k,
            q - line.q_max,
            line.q_max,
            q,
            line.q_max,
        );
    }

    for (k, pipe) in gas_net.pipes.iter().enumerate() {
        let f = gas.flow[k].abs();
        check(
            &mut r.gas,
            GasPipeFlow,
            k,
            f - pipe.flow_max,
            pipe.flow_max,
            f,
            pipe.flow_max,
        );
    }
    for (n, node) in gas_net.nodes.iter().enumerate() {
        let pr = gas.pressure[n];
        check(
            &mut r.gas,
            OverPressure,
            n,
            pr - node.pr_max,
            node.pr_max,
            pr,
            node.pr_max,
        );
        check(
            &mut r.gas,
            UnderPressure,
            n,
            node.pr_min - pr,
            node.pr_max,
            pr,
            node.pr_min,
        );
        if n != gas_net.root {
            let g = gas.consumption[n];
            check(
                &mut r.gas,
                GasConsumption,
                n,
                g - node.consumption_max,
                node.consumption_max,
                g,
                node.consumption_max,
            );
        }
    }

    for (n, node) in heat_net.nodes.iter().enumerate() {
        let m = heat.nodal_flow[n];
        check(
            &mut r.heat,
            NodalFlowHigh,
            n,
            m - node.flow_max,
            node.flow_max,
            m,
            node.flow_max,
        );
        check(
            &mut r.heat,
            NodalFlowLow,
            n,
            node.flow_min - m,
            node.flow_max,
            m,
            node.flow_min,
        );
    }
    for (k, pipe) in heat_net.pipes.iter().enumerate() {
        let m = heat.pipe_flow[k];
        check(
            &mut r.heat,
            HeatPipeFlow,
            k,
            m - pipe.flow_max,
            pipe.flow_max,
            m,
            pipe.flow_max,
        );
    }

    r.total_cost = r.electric_cost() + r.gas_cost() + r.heat_cost();
    r
}

use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasPipe {
    pub from: usize,
    pub to: usize,
    /// Weymouth constant; flow in m^3/h for pressures in Pa.
    pub c: f64,
    /// m^3/h
    pub flow_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasNode {
    pub pr_min: f64,
    pub pr_max: f64,
    /// m^3/h
    pub consumption_max: f64,
}

/// Radial gas network fed from a city gate held at its upper pressure bound.
#[derive(Debug, Clone, PartialEq)]
pub struct GasNet {
    pub root: usize,
    pub nodes: Vec<GasNode>,
    pub pipes: Vec<GasPipe>,
    tree: Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GasflowState {
    /// Pipe flows oriented away from the root, m^3/h.
    pub flow: Vec<f64>,
    /// Pa
    pub pressure: Vec<f64>,
    pub consumption: Vec<f64>,
    /// Total drawn through the city gate.
    pub supply: f64,
}

impl GasNet {
    pub fn new(root: usize, nodes: Vec<GasNode>, pipes: Vec<GasPipe>) -> Result<Self> {
        for (i, n) in nodes.iter().enumerate() {
            if !(0.0 < n.pr_min && n.pr_min < n.pr_max && n.consumption_max > 0.0) {
                return Err(Error::config(format!("gas node {i} has invalid bounds")));
            }
        }
        for p in &pipes {
            if !(p.c > 0.0 && p.flow_max > 0.0) {
                return Err(Error::config(format!(
                    "gas pipe ({}, {}) has invalid parameters",
                    p.from, p.to
                )));
            }
        }
        let edges: Vec<_> = pipes.iter().map(|p| (p.from, p.to)).collect();
        let tree = Tree::build("gas network", nodes.len(), root, &edges)?;
        Ok(Self {
            root,
            nodes,
            pipes,
            tree,
        })
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn reference_pressure(&self) -> f64 {
        self.nodes[self.root].pr_max
    }
}

/// Weymouth flow from `pr_up` to `pr_down`; negative when the pressure
/// gradient points the other way.
pub fn weymouth_flow(pr_up: f64, pr_down: f64, c: f64) -> f64 {
    let diff = pr_up * pr_up - pr_down * pr_down;
    if diff == 0.0 {
        0.0
    } else {
        diff.signum() * c * diff.abs().sqrt()
    }
}

/// Downstream pressure that carries `flow` through a pipe; clipped at zero
/// when the upstream pressure cannot sustain the flow.
pub fn downstream_pressure(pr_up: f64, flow: f64, c: f64) -> f64 {
    let drop = flow / c;
    (pr_up * pr_up - drop * drop).max(0.0).sqrt()
}

pub fn solve_gasflow(net: &GasNet, consumption: &[f64]) -> Result<GasflowState> {
    if consumption.len() != net.node_count() {
        return Err(Error::Dimension {
            expected: net.node_count(),
            actual: consumption.len(),
        });
    }
    if let Some(i) = consumption.iter().position(|g| !(*g >= 0.0)) {
        return Err(Error::config(format!(
            "gas consumption at node {i} is negative or not a number"
        )));
    }
    let flow = net.tree.edge_subtree_sums(consumption);
    let mut pressure = vec![net.reference_pressure(); net.node_count()];
    for &n in &net.tree.order {
        if let (Some(parent), Some(k)) = (net.tree.parent[n], net.tree.parent_edge[n]) {
            pressure[n] = downstream_pressure(pressure[parent], flow[k], net.pipes[k].c);
        }
    }
    Ok(GasflowState {
        flow,
        pressure,
        consumption: consumption.to_vec(),
        supply: consumption.iter().sum(),
    })
}

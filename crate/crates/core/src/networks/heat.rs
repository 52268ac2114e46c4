use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatPipe {
    pub from: usize,
    pub to: usize,
    /// m
    pub length: f64,
    /// kg/s
    pub flow_max: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatNode {
    /// K
    pub t_supply: f64,
    pub t_return: f64,
    /// kg/s
    pub flow_min: f64,
    pub flow_max: f64,
}

/// Temperature profile used to derive node temperatures from pipe lengths.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TemperatureProfile {
    /// Supply temperature at the source, K.
    pub supply_at_source: f64,
    /// Return temperature at the most remote node, K.
    pub return_at_far_end: f64,
    /// K/m
    pub supply_loss: f64,
    pub return_loss: f64,
}

/// District heating network with constant node temperatures.
#[derive(Debug, Clone, PartialEq)]
pub struct HeatNet {
    pub root: usize,
    /// J/(kg K)
    pub c_f: f64,
    pub nodes: Vec<HeatNode>,
    pub pipes: Vec<HeatPipe>,
    tree: Tree,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HeatflowState {
    /// Consumer draw at each node; the source entry carries the total.
    pub nodal_flow: Vec<f64>,
    pub pipe_flow: Vec<f64>,
}

impl HeatNet {
    pub fn new(root: usize, c_f: f64, nodes: Vec<HeatNode>, pipes: Vec<HeatPipe>) -> Result<Self> {
        if c_f <= 0.0 {
            return Err(Error::config("heat capacity must be positive"));
        }
        for (i, n) in nodes.iter().enumerate() {
            if !(n.t_supply > n.t_return) {
                return Err(Error::config(format!(
                    "heat node {i}: supply temperature {:.2} K does not exceed return {:.2} K",
                    n.t_supply, n.t_return
                )));
            }
            if !(0.0 <= n.flow_min && n.flow_min < n.flow_max) {
                return Err(Error::config(format!(
                    "heat node {i} has invalid flow bounds"
                )));
            }
        }
        for p in &pipes {
            if !(p.length >= 0.0 && p.flow_max > 0.0) {
                return Err(Error::config(format!(
                    "heat pipe ({}, {}) has invalid parameters",
                    p.from, p.to
                )));
            }
        }
        let edges: Vec<_> = pipes.iter().map(|p| (p.from, p.to)).collect();
        let tree = Tree::build("heat network", nodes.len(), root, &edges)?;
        Ok(Self {
            root,
            c_f,
            nodes,
            pipes,
            tree,
        })
    }

    /// Builds node temperatures from pipe lengths: supply water cools with
    /// distance from the source, and return water cools on its way back from
    /// the most remote node.
    pub fn from_lengths(
        root: usize,
        c_f: f64,
        profile: TemperatureProfile,
        flow_bounds: &[(f64, f64)],
        pipes: Vec<HeatPipe>,
    ) -> Result<Self> {
        let edges: Vec<_> = pipes.iter().map(|p| (p.from, p.to)).collect();
        let tree = Tree::build("heat network", flow_bounds.len(), root, &edges)?;
        let mut distance = vec![0.0; flow_bounds.len()];
        for &n in &tree.order {
            if let (Some(parent), Some(k)) = (tree.parent[n], tree.parent_edge[n]) {
                distance[n] = distance[parent] + pipes[k].length;
            }
        }
        let far = distance.iter().copied().fold(0.0, f64::max);
        let nodes = flow_bounds
            .iter()
            .zip(&distance)
            .map(|(&(flow_min, flow_max), &d)| HeatNode {
                t_supply: profile.supply_at_source - profile.supply_loss * d,
                t_return: profile.return_at_far_end - profile.return_loss * (far - d),
                flow_min,
                flow_max,
            })
            .collect();
        Self::new(root, c_f, nodes, pipes)
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }
}

/// Mass flow in kg/s that delivers `heat_mw` across a temperature drop.
pub fn mass_flow(heat_mw: f64, c_f: f64, t_supply: f64, t_return: f64) -> f64 {
    heat_mw * 1e6 / (c_f * (t_supply - t_return))
}

/// Nodal and pipe mass flows for consumer heat draws in MWt. The source entry
/// of `nodal_heat` is ignored.
pub fn solve_heatflow(net: &HeatNet, nodal_heat: &[f64]) -> Result<HeatflowState> {
    if nodal_heat.len() != net.node_count() {
        return Err(Error::Dimension {
            expected: net.node_count(),
            actual: nodal_heat.len(),
        });
    }
    if let Some(i) = nodal_heat.iter().position(|h| !(*h >= 0.0)) {
        return Err(Error::config(format!(
            "heat draw at node {i} is negative or not a number"
        )));
    }
    let mut nodal_flow: Vec<f64> = net
        .nodes
        .iter()
        .zip(nodal_heat)
        .map(|(n, &h)| mass_flow(h, net.c_f, n.t_supply, n.t_return))
        .collect();
    nodal_flow[net.root] = 0.0;
    let pipe_flow = net.tree.edge_subtree_sums(&nodal_flow);
    nodal_flow[net.root] = nodal_flow.iter().sum();
    Ok(HeatflowState {
        nodal_flow,
        pipe_flow,
    })
}

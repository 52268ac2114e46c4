use serde::{Deserialize, Serialize};

use super::tree::Tree;
use crate::error::{Error, Result};

/// Distribution line. `b1` and `b2` are voltage-drop coefficients in pu per
/// MW and per MVar of flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ElectricLine {
    pub from: usize,
    pub to: usize,
    pub b1: f64,
    pub b2: f64,
    pub p_max: f64,
    pub q_max: f64,
}

impl ElectricLine {
    /// Line from series impedance in ohms at a nominal line-to-line voltage in kV.
    pub fn from_ohms(
        from: usize,
        to: usize,
        r: f64,
        x: f64,
        base_kv: f64,
        p_max: f64,
        q_max: f64,
    ) -> Self {
        let z_base = base_kv * base_kv;
        Self {
            from,
            to,
            b1: r / z_base,
            b2: x / z_base,
            p_max,
            q_max,
        }
    }
}

/// Radial distribution feeder rooted at the substation.
#[derive(Debug, Clone, PartialEq)]
pub struct ElectricNet {
    pub bus_count: usize,
    pub root: usize,
    pub root_voltage: f64,
    pub v_min: f64,
    pub v_max: f64,
    pub lines: Vec<ElectricLine>,
    tree: Tree,
}

/// Linearized branch-flow solution. Flows are oriented away from the root.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistflowState {
    pub p_flow: Vec<f64>,
    pub q_flow: Vec<f64>,
    pub voltage: Vec<f64>,
    pub import_p: f64,
    pub import_q: f64,
}

impl ElectricNet {
    pub fn new(
        bus_count: usize,
        root: usize,
        root_voltage: f64,
        v_min: f64,
        v_max: f64,
        lines: Vec<ElectricLine>,
    ) -> Result<Self> {
        if !(v_min < v_max) || root_voltage <= 0.0 {
            return Err(Error::config(
                "electric network voltage bounds are inconsistent",
            ));
        }
        for line in &lines {
            if !(line.b1 >= 0.0 && line.b2 >= 0.0 && line.p_max > 0.0 && line.q_max > 0.0) {
                return Err(Error::config(format!(
                    "electric line ({}, {}) has invalid parameters",
                    line.from, line.to
                )));
            }
        }
        let edges: Vec<_> = lines.iter().map(|l| (l.from, l.to)).collect();
        let tree = Tree::build("electric network", bus_count, root, &edges)?;
        Ok(Self {
            bus_count,
            root,
            root_voltage,
            v_min,
            v_max,
            lines,
            tree,
        })
    }

    pub fn parent_of(&self, bus: usize) -> Option<usize> {
        self.tree.parent[bus]
    }
}

/// Branch flows and bus voltages for per-bus net withdrawals `(p, q)`.
pub fn solve_distflow(net: &ElectricNet, injections: &[(f64, f64)]) -> Result<DistflowState> {
    if injections.len() != net.bus_count {
        return Err(Error::Dimension {
            expected: net.bus_count,
            actual: injections.len(),
        });
    }
    let p: Vec<f64> = injections.iter().map(|x| x.0).collect();
    let q: Vec<f64> = injections.iter().map(|x| x.1).collect();
    let p_flow = net.tree.edge_subtree_sums(&p);
    let q_flow = net.tree.edge_subtree_sums(&q);

    let mut voltage = vec![net.root_voltage; net.bus_count];
    for &n in &net.tree.order {
        if let (Some(parent), Some(k)) = (net.tree.parent[n], net.tree.parent_edge[n]) {
            let line = &net.lines[k];
            voltage[n] = voltage[parent] - (line.b1 * p_flow[k] + line.b2 * q_flow[k]);
        }
    }
    Ok(DistflowState {
        p_flow,
        q_flow,
        voltage,
        import_p: p.iter().sum(),
        import_q: q.iter().sum(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(from: usize, to: usize, b1: f64, b2: f64) -> ElectricLine {
        ElectricLine {
            from,
            to,
            b1,
            b2,
            p_max: 10.0,
            q_max: 10.0,
        }
    }

    #[test]
    fn two_bus_example() {
        let net = ElectricNet::new(2, 0, 1.0, 0.9, 1.1, vec![line(0, 1, 0.01, 0.02)]).unwrap();
        let s = solve_distflow(&net, &[(0.0, 0.0), (1.0, 0.5)]).unwrap();
        assert_eq!((s.p_flow[0], s.q_flow[0]), (1.0, 0.5));
        assert!((s.voltage[1] - 0.98).abs() < 1e-12);
        assert_eq!(s.import_p, 1.0);
    }

    #[test]
    fn zero_load_is_flat() {
        let net = ElectricNet::new(
            3,
            0,
            1.02,
            0.9,
            1.1,
            vec![line(0, 1, 0.1, 0.1), line(1, 2, 0.1, 0.1)],
        )
        .unwrap();
        let s = solve_distflow(&net, &[(0.0, 0.0); 3]).unwrap();
        assert!(s.voltage.iter().all(|&v| v == 1.02));
        assert!(s.p_flow.iter().all(|&f| f == 0.0));
    }

    #[test]
    fn impedance_conversion() {
        let l = ElectricLine::from_ohms(0, 1, 1.0, 2.0, 10.0, 1.0, 1.0);
        assert!((l.b1 - 0.01).abs() < 1e-15);
        assert!((l.b2 - 0.02).abs() < 1e-15);
    }

    #[test]
    fn rejects_bad_inputs() {
        assert!(ElectricNet::new(2, 0, 1.0, 1.1, 0.9, vec![line(0, 1, 0.1, 0.1)]).is_err());
        assert!(ElectricNet::new(
            3,
            0,
            1.0,
            0.9,
            1.1,
            vec![line(0, 1, 0.1, 0.1), line(0, 1, 0.1, 0.1)]
        )
        .is_err());
        let net = ElectricNet::new(2, 0, 1.0, 0.9, 1.1, vec![line(0, 1, 0.1, 0.1)]).unwrap();
        assert!(matches!(
            solve_distflow(&net, &[(0.0, 0.0)]),
            Err(Error::Dimension { .. })
        ));
    }
}

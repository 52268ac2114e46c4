use std::collections::VecDeque;

use crate::error::{Error, Result};

/// Rooted orientation of an undirected radial topology.
#[derive(Debug, Clone, PartialEq)]
pub(crate) struct Tree {
    /// Parent node of each node; `None` only at the root.
    pub parent: Vec<Option<usize>>,
    /// Edge joining each node to its parent.
    pub parent_edge: Vec<Option<usize>>,
    /// Child endpoint of each edge.
    pub edge_child: Vec<usize>,
    /// Breadth-first order starting at the root.
    pub order: Vec<usize>,
    /// Edges between the root and each node.
    pub depth: Vec<usize>,
}

impl Tree {
    pub fn build(
        label: &str,
        node_count: usize,
        root: usize,
        edges: &[(usize, usize)],
    ) -> Result<Self> {
        if node_count == 0 || root >= node_count {
            return Err(Error::config(format!(
                "{label}: root {root} outside {node_count} nodes"
            )));
        }
        if edges.len() + 1 != node_count {
            return Err(Error::config(format!(
                "{label}: a radial network of {node_count} nodes needs {} edges, found {}",
                node_count - 1,
                edges.len()
            )));
        }
        let mut adjacency = vec![Vec::new(); node_count];
        for (k, &(a, b)) in edges.iter().enumerate() {
            if a >= node_count || b >= node_count || a == b {
                return Err(Error::config(format!(
                    "{label}: edge {k} ({a}, {b}) is invalid"
                )));
            }
            adjacency[a].push((b, k));
            adjacency[b].push((a, k));
        }

        let mut parent = vec![None; node_count];
        let mut parent_edge = vec![None; node_count];
        let mut edge_child = vec![usize::MAX; edges.len()];
        let mut depth = vec![0; node_count];
        let mut seen = vec![false; node_count];
        let mut order = Vec::with_capacity(node_count);
        let mut queue = VecDeque::from([root]);
        seen[root] = true;
        while let Some(n) = queue.pop_front() {
            order.push(n);
            for &(m, k) in &adjacency[n] {
                if !seen[m] {
                    seen[m] = true;
                    parent[m] = Some(n);
                    parent_edge[m] = Some(k);
                    edge_child[k] = m;
                    depth[m] = depth[n] + 1;
                    queue.push_back(m);
                }
            }
        }
        if order.len() != node_count {
            let missing = seen.iter().position(|s| !s).unwrap_or(0);
            return Err(Error::config(format!(
                "{label}: node {missing} is not connected to the root"
            )));
        }
        Ok(Self {
            parent,
            parent_edge,
            edge_child,
            order,
            depth,
        })
    }

    /// Sum of `values` over the subtree below each edge.
    pub fn edge_subtree_sums(&self, values: &[f64]) -> Vec<f64> {
        let mut subtree = values.to_vec();
        let mut edge_sum = vec![0.0; self.edge_child.len()];
        for &n in self.order.iter().rev() {
            if let (Some(p), Some(k)) = (self.parent[n], self.parent_edge[n]) {
                edge_sum[k] = subtree[n];
                subtree[p] += subtree[n];
            }
        }
        edge_sum
    }
}

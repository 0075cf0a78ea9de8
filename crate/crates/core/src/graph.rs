//! Undirected graphs shared by the physical networks and the communication
//! overlay.
//!
//! Nodes are dense `0..node_count` indices. Edges are stored with the smaller
//! endpoint first; the order in which they were supplied is kept so that
//! per-edge data (line susceptances, pipe laws) can live in parallel vectors.

use std::collections::{HashSet, VecDeque};

use nalgebra::DMatrix;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq)]
pub struct Graph {
    node_count: usize,
    edges: Vec<(usize, usize)>,
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds a graph, rejecting self-loops, out-of-range endpoints and
    /// duplicate edges (in either orientation).
    pub fn new(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::InvalidModel("graph must have at least one node".into()));
        }
        let mut seen = HashSet::with_capacity(edges.len());
        let mut normalized = Vec::with_capacity(edges.len());
        let mut neighbors = vec![Vec::new(); node_count];
        for &(a, b) in edges {
            if a >= node_count || b >= node_count {
                return Err(Error::InvalidModel(format!(
                    "edge ({a}, {b}) references a node outside 0..{node_count}"
                )));
            }
            if a == b {
                return Err(Error::InvalidModel(format!("self-loop at node {a}")));
            }
            let key = (a.min(b), a.max(b));
            if !seen.insert(key) {
                return Err(Error::InvalidModel(format!("duplicate edge ({a}, {b})")));
            }
            normalized.push(key);
            neighbors[a].push(b);
            neighbors[b].push(a);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }
        Ok(Self {
            node_count,
            edges: normalized,
            neighbors,
        })
    }

    pub fn node_count(&self) -> usize {
        self.node_count
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, node: usize) -> &[usize] {
        &self.neighbors[node]
    }

    pub fn degree(&self, node: usize) -> usize {
        self.neighbors[node].len()
    }

    /// Position of the edge `{a, b}` in [`Graph::edges`], if present.
    pub fn edge_index(&self, a: usize, b: usize) -> Option<usize> {
        let key = (a.min(b), a.max(b));
        self.edges.iter().position(|&e| e == key)
    }

    /// Copy of the graph with edge `index` removed.
    pub fn without_edge(&self, index: usize) -> Self {
        let edges: Vec<_> = self
            .edges
            .iter()
            .enumerate()
            .filter(|&(i, _)| i != index)
            .map(|(_, &e)| e)
            .collect();
        // Cannot fail: the remaining edges were already validated.
        Graph::new(self.node_count, &edges).expect("subgraph of a valid graph")
    }

    /// 0/1 adjacency matrix.
    pub fn adjacency_matrix(&self) -> DMatrix<f64> {
        let mut a = DMatrix::zeros(self.node_count, self.node_count);
        for &(m, n) in &self.edges {
            a[(m, n)] = 1.0;
            a[(n, m)] = 1.0;
        }
        a
    }

    /// Breadth-first reachability from node 0.
    pub fn is_connected(&self) -> bool {
        self.reachable_from(&[0]).iter().all(|&r| r)
    }

    /// Marks every node reachable from any of `sources`.
    pub fn reachable_from(&self, sources: &[usize]) -> Vec<bool> {
        let mut seen = vec![false; self.node_count];
        let mut queue = VecDeque::new();
        for &s in sources {
            if !seen[s] {
                seen[s] = true;
                queue.push_back(s);
            }
        }
        while let Some(n) = queue.pop_front() {
            for &m in &self.neighbors[n] {
                if !seen[m] {
                    seen[m] = true;
                    queue.push_back(m);
                }
            }
        }
        seen
    }

    /// Weighted Laplacian: `-w` off the diagonal for each edge, row sums on
    /// the diagonal. `weights` is parallel to [`Graph::edges`].
    pub fn weighted_laplacian(&self, weights: &[f64]) -> Result<DMatrix<f64>> {
        crate::error::check_len(self.edges.len(), weights.len())?;
        let n = self.node_count;
        let mut b = DMatrix::zeros(n, n);
        for (&(m, k), &w) in self.edges.iter().zip(weights) {
            if !(w > 0.0 && w.is_finite()) {
                return Err(Error::InvalidModel(format!(
                    "edge ({m}, {k}) has nonpositive weight {w}"
                )));
            }
            b[(m, k)] -= w;
            b[(k, m)] -= w;
            b[(m, m)] += w;
            b[(k, k)] += w;
        }
        Ok(b)
    }
}

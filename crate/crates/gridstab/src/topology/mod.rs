//! Power-grid topologies and nodal injections.
//!
//! A [`GridTopology`] is a connected simple undirected graph; a [`PowerGrid`]
//! pairs it with per-node injected power. Generated grids carry balanced
//! binary injections (half the nodes inject +1 p.u., half consume −1 p.u.)
//! so that a synchronous fixed point can exist; arbitrary real injections are
//! allowed through [`PowerGrid::with_raw_injections`] for analysis setups
//! such as decoupled single-node studies.

mod features;
mod growth;

pub use features::{node_features, FeatureScaler, NodeFeatures, FEATURE_COUNT, FEATURE_NAMES};
pub use growth::{assign_injections, generate_topology, GrowthParams};

use crate::error::{Error, Result};
use serde::{Deserialize, Serialize};
use std::collections::HashSet;
use std::path::Path;

/// Connected simple undirected graph on nodes `0..n`.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GridTopology {
    n: usize,
    /// Normalized edge list: `i < j`, sorted, no duplicates.
    edges: Vec<(usize, usize)>,
    /// Adjacency lists, each sorted ascending.
    neighbors: Vec<Vec<usize>>,
}

impl GridTopology {
    /// Builds a topology from an edge list, validating simplicity and
    /// connectivity.
    pub fn new(n: usize, edges: Vec<(usize, usize)>) -> Result<Self> {
        if n == 0 {
            return Err(Error::InvalidGrid("node count must be positive".into()));
        }
        let mut normalized = Vec::with_capacity(edges.len());
        let mut seen = HashSet::with_capacity(edges.len());
        for (a, b) in edges {
            if a == b {
                return Err(Error::InvalidGrid(format!("self-loop at node {a}")));
            }
            if a >= n || b >= n {
                return Err(Error::InvalidGrid(format!(
                    "edge ({a}, {b}) out of range for n = {n}"
                )));
            }
            let e = (a.min(b), a.max(b));
            if !seen.insert(e) {
                return Err(Error::InvalidGrid(format!("duplicate edge ({}, {})", e.0, e.1)));
            }
            normalized.push(e);
        }
        normalized.sort_unstable();
        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &normalized {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for adj in &mut neighbors {
            adj.sort_unstable();
        }
        let topo = Self { n, edges: normalized, neighbors };
        if !topo.is_connected() {
            return Err(Error::Disconnected(format!(
                "{n} nodes, {} edges do not form one component",
                topo.edges.len()
            )));
        }
        Ok(topo)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edges.len() as f64 / self.n as f64
    }

    fn is_connected(&self) -> bool {
        let mut seen = vec![false; self.n];
        let mut stack = vec![0usize];
        seen[0] = true;
        let mut count = 1;
        while let Some(v) = stack.pop() {
            for &w in &self.neighbors[v] {
                if !seen[w] {
                    seen[w] = true;
                    count += 1;
                    stack.push(w);
                }
            }
        }
        count == self.n
    }

    /// BFS hop distances from `src` to every node.
    pub fn bfs_distances(&self, src: usize) -> Vec<usize> {
        let mut dist = vec![usize::MAX; self.n];
        dist[src] = 0;
        let mut queue = std::collections::VecDeque::from([src]);
        while let Some(v) = queue.pop_front() {
            for &w in &self.neighbors[v] {
                if dist[w] == usize::MAX {
                    dist[w] = dist[v] + 1;
                    queue.push_back(w);
                }
            }
        }
        dist
    }

    /// Relabels nodes: node `i` becomes `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> Result<Self> {
        if perm.len() != self.n {
            return Err(Error::DimensionMismatch { expected: self.n, got: perm.len() });
        }
        let edges = self.edges.iter().map(|&(i, j)| (perm[i], perm[j])).collect();
        Self::new(self.n, edges)
    }
}

/// Topology plus per-node injected power (positive = source, negative = sink).
#[derive(Debug, Clone, PartialEq)]
pub struct PowerGrid {
    topology: GridTopology,
    injections: Vec<f64>,
}

impl PowerGrid {
    /// Standard constructor for dataset grids: injections must be ±1 and sum
    /// to zero.
    pub fn new(topology: GridTopology, injections: Vec<f64>) -> Result<Self> {
        if injections.len() != topology.n() {
            return Err(Error::DimensionMismatch {
                expected: topology.n(),
                got: injections.len(),
            });
        }
        if topology.n() % 2 != 0 {
            return Err(Error::OddNodeCount(topology.n()));
        }
        for (i, &p) in injections.iter().enumerate() {
            if p != 1.0 && p != -1.0 {
                return Err(Error::InvalidGrid(format!(
                    "injection at node {i} is {p}, expected -1 or +1"
                )));
            }
        }
        let sum: f64 = injections.iter().sum();
        if sum != 0.0 {
            return Err(Error::InvalidGrid(format!(
                "injections sum to {sum}, sources and sinks must balance"
            )));
        }
        Ok(Self { topology, injections })
    }

    /// Constructor for analysis setups with arbitrary real injections
    /// (e.g. all-zero power, or a single uncoupled node). Skips the ±1 and
    /// balance checks; the topology is still validated.
    pub fn with_raw_injections(topology: GridTopology, injections: Vec<f64>) -> Result<Self> {
        if injections.len() != topology.n() {
            return Err(Error::DimensionMismatch {
                expected: topology.n(),
                got: injections.len(),
            });
        }
        Ok(Self { topology, injections })
    }

    pub fn topology(&self) -> &GridTopology {
        &self.topology
    }

    pub fn n(&self) -> usize {
        self.topology.n()
    }

    pub fn injections(&self) -> &[f64] {
        &self.injections
    }
}

/// On-disk grid document: `{"n": ..., "edges": [[i, j], ...], "injections": [...]}`.
#[derive(Debug, Serialize, Deserialize)]
struct GridFile {
    n: usize,
    edges: Vec<[usize; 2]>,
    injections: Vec<i8>,
}

/// Serializes a grid to the JSON grid format.
pub fn grid_to_json(grid: &PowerGrid) -> Result<String> {
    let file = GridFile {
        n: grid.n(),
        edges: grid.topology().edges().iter().map(|&(i, j)| [i, j]).collect(),
        injections: grid
            .injections()
            .iter()
            .map(|&p| {
                if p > 0.0 {
                    1
                } else {
                    -1
                }
            })
            .collect(),
    };
    Ok(serde_json::to_string_pretty(&file)?)
}

/// Parses and fully validates a grid from the JSON grid format.
pub fn grid_from_json(text: &str) -> Result<PowerGrid> {
    let file: GridFile = serde_json::from_str(text)?;
    if file.injections.len() != file.n {
        return Err(Error::InvalidGrid(format!(
            "{} injections for {} nodes",
            file.injections.len(),
            file.n
        )));
    }
    for (i, &p) in file.injections.iter().enumerate() {
        if p != 1 && p != -1 {
            return Err(Error::InvalidGrid(format!(
                "injection at node {i} is {p}, expected -1 or +1"
            )));
        }
    }
    let topology = GridTopology::new(file.n, file.edges.iter().map(|e| (e[0], e[1])).collect())?;
    PowerGrid::new(topology, file.injections.iter().map(|&p| f64::from(p)).collect())
}

pub fn write_grid(path: &Path, grid: &PowerGrid) -> Result<()> {
    std::fs::write(path, grid_to_json(grid)?)?;
    Ok(())
}

pub fn read_grid(path: &Path) -> Result<PowerGrid> {
    let text = std::fs::read_to_string(path)?;
    grid_from_json(&text).map_err(|e| match e {
        Error::InvalidGrid(msg) => {
            Error::InvalidGrid(format!("{}: {msg}", path.display()))
        }
        other => other,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path_graph(n: usize) -> GridTopology {
        GridTopology::new(n, (0..n - 1).map(|i| (i, i + 1)).collect()).unwrap()
    }

    #[test]
    fn rejects_self_loops_duplicates_and_disconnection() {
        assert!(matches!(
            GridTopology::new(3, vec![(0, 0), (1, 2)]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            GridTopology::new(3, vec![(0, 1), (1, 0), (1, 2)]),
            Err(Error::InvalidGrid(_))
        ));
        assert!(matches!(
            GridTopology::new(4, vec![(0, 1), (2, 3)]),
            Err(Error::Disconnected(_))
        ));
    }

    #[test]
    fn injection_validation() {
        let topo = path_graph(2);
        assert!(PowerGrid::new(topo.clone(), vec![1.0, -1.0]).is_ok());
        assert!(PowerGrid::new(topo.clone(), vec![1.0, 1.0]).is_err());
        assert!(PowerGrid::new(topo.clone(), vec![0.5, -0.5]).is_err());
        assert!(matches!(
            PowerGrid::new(path_graph(3), vec![1.0, -1.0, 1.0]),
            Err(Error::OddNodeCount(3))
        ));
        // raw constructor admits what `new` rejects
        assert!(PowerGrid::with_raw_injections(topo, vec![0.0, 0.0]).is_ok());
    }

    #[test]
    fn grid_json_round_trip() {
        let topo = GridTopology::new(4, vec![(0, 1), (1, 2), (2, 3), (3, 0)]).unwrap();
        let grid = PowerGrid::new(topo, vec![1.0, -1.0, 1.0, -1.0]).unwrap();
        let text = grid_to_json(&grid).unwrap();
        let back = grid_from_json(&text).unwrap();
        assert_eq!(grid, back);
    }

    #[test]
    fn grid_json_rejects_unbalanced() {
        let text = r#"{"n": 2, "edges": [[0, 1]], "injections": [1, 1]}"#;
        assert!(grid_from_json(text).is_err());
    }
}

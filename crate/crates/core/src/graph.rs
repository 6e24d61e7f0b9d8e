//! Interaction topology of the agent team.
//!
//! Agents are numbered `1..=n` in every external format (configs, reports,
//! CLI output). Internally a [`Graph`] stores 0-based indices; the conversion
//! happens once, in [`Graph::new`].

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("a graph needs at least 2 agents, got {0}")]
    TooFewAgents(usize),
    #[error("edge ({0}, {1}) references an agent outside 1..={2}")]
    IndexOutOfRange(usize, usize, usize),
    #[error("self-loop on agent {0}")]
    SelfLoop(usize),
    #[error("duplicate edge ({0}, {1})")]
    DuplicateEdge(usize, usize),
    #[error("graph is disconnected: agent {0} is unreachable from agent 1")]
    DisconnectedGraph(usize),
}

/// Undirected, connected, unweighted interaction graph.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    /// 0-based, `i < j`, sorted.
    edges: Vec<(usize, usize)>,
    /// Ascending 0-based neighbor lists.
    neighbors: Vec<Vec<usize>>,
}

impl Graph {
    /// Builds and validates a graph from 1-based edges.
    pub fn new(n: usize, edges: &[(usize, usize)]) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewAgents(n));
        }
        let mut seen = BTreeSet::new();
        for &(a, b) in edges {
            if a == 0 || b == 0 || a > n || b > n {
                return Err(GraphError::IndexOutOfRange(a, b, n));
            }
            if a == b {
                return Err(GraphError::SelfLoop(a));
            }
            let key = (a.min(b) - 1, a.max(b) - 1);
            if !seen.insert(key) {
                return Err(GraphError::DuplicateEdge(a, b));
            }
        }

        let mut neighbors = vec![Vec::new(); n];
        for &(i, j) in &seen {
            neighbors[i].push(j);
            neighbors[j].push(i);
        }
        for list in &mut neighbors {
            list.sort_unstable();
        }

        let graph = Self {
            n,
            edges: seen.into_iter().collect(),
            neighbors,
        };
        if let Some(unreached) = graph.first_unreachable() {
            return Err(GraphError::DisconnectedGraph(unreached + 1));
        }
        Ok(graph)
    }

    fn first_unreachable(&self) -> Option<usize> {
        self.bfs(0).iter().position(|d| d.is_none())
    }

    fn bfs(&self, source: usize) -> Vec<Option<usize>> {
        let mut dist = vec![None; self.n];
        dist[source] = Some(0);
        let mut queue = VecDeque::from([source]);
        while let Some(u) = queue.pop_front() {
            let du = dist[u].unwrap_or_default();
            for &v in &self.neighbors[u] {
                if dist[v].is_none() {
                    dist[v] = Some(du + 1);
                    queue.push_back(v);
                }
            }
        }
        dist
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges as 0-based `(i, j)` pairs with `i < j`.
    pub fn edges(&self) -> &[(usize, usize)] {
        &self.edges
    }

    /// Edges converted back to the 1-based external convention.
    pub fn edges_one_based(&self) -> Vec<(usize, usize)> {
        self.edges.iter().map(|&(i, j)| (i + 1, j + 1)).collect()
    }

    /// Ascending 0-based neighbor list of agent `i` (0-based).
    pub fn neighbors(&self, i: usize) -> &[usize] {
        &self.neighbors[i]
    }

    pub fn degree(&self, i: usize) -> usize {
        self.neighbors[i].len()
    }

    pub fn degrees(&self) -> Vec<usize> {
        self.neighbors.iter().map(Vec::len).collect()
    }

    pub fn max_degree(&self) -> usize {
        self.neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.neighbors[i].binary_search(&j).is_ok()
    }

    /// Dense graph Laplacian: degrees on the diagonal, `-1` per edge.
    ///
    /// Entries are small integers, so the zero row sums are exact in `f64`.
    pub fn laplacian(&self) -> DMatrix<f64> {
        let mut lap = DMatrix::zeros(self.n, self.n);
        for (i, nbrs) in self.neighbors.iter().enumerate() {
            lap[(i, i)] = nbrs.len() as f64;
            for &j in nbrs {
                lap[(i, j)] = -1.0;
            }
        }
        lap
    }

    /// All-pairs hop distances by breadth-first search from every node.
    pub fn geodesics(&self) -> GeodesicTable {
        let mut table = vec![vec![0usize; self.n]; self.n];
        for (s, row) in table.iter_mut().enumerate() {
            for (t, d) in self.bfs(s).into_iter().enumerate() {
                // connectivity is checked at construction
                row[t] = d.expect("connected graph");
            }
        }
        GeodesicTable { dist: table }
    }
}

/// Shortest-path hop counts between every pair of agents (0-based lookup).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GeodesicTable {
    dist: Vec<Vec<usize>>,
}

impl GeodesicTable {
    pub fn get(&self, i: usize, j: usize) -> usize {
        self.dist[i][j]
    }

    pub fn n(&self) -> usize {
        self.dist.len()
    }

    pub fn rows(&self) -> &[Vec<usize>] {
        &self.dist
    }

    /// Longest shortest path.
    pub fn diameter(&self) -> usize {
        self.dist
            .iter()
            .flat_map(|r| r.iter().copied())
            .max()
            .unwrap_or(0)
    }
}

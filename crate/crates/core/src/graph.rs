//! Interconnection networks.
//!
//! A [`Graph`] is a dense 0/1 adjacency over `n` nodes with no self-loops,
//! always strongly connected. Node indices are 0-based in the Rust API and
//! 1-based in every user-facing format (JSON, CSV, error messages).

use std::collections::VecDeque;
use std::fmt;

use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum GraphError {
    #[error("graph needs at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid edge ({}, {}) for a graph with {n} nodes", .from + 1, .to + 1)]
    InvalidEdge { from: usize, to: usize, n: usize },
    #[error("edge ({}, {}) already exists", .from + 1, .to + 1)]
    EdgeExists { from: usize, to: usize },
    #[error("graph is not strongly connected: node {} cannot reach node {}", .from + 1, .to + 1)]
    NotStronglyConnected { from: usize, to: usize },
    #[error("unknown catalog graph {0:?} (expected G1..G6)")]
    UnknownCatalogName(String),
}

/// Directed graph with adjacency `a[i][j] = 1` iff there is an edge `i -> j`.
#[derive(Clone, PartialEq, Eq)]
pub struct Graph {
    n: usize,
    adj: Vec<bool>,
}

impl fmt::Debug for Graph {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Graph")
            .field("n", &self.n)
            .field("edges", &self.edges())
            .finish()
    }
}

impl Graph {
    /// Builds a graph from 0-based ordered pairs. Duplicate pairs are ignored.
    pub fn from_edges(n: usize, edges: &[(usize, usize)], undirected: bool) -> Result<Self, GraphError> {
        if n < 2 {
            return Err(GraphError::TooFewNodes(n));
        }
        let mut adj = vec![false; n * n];
        for &(i, j) in edges {
            if i >= n || j >= n || i == j {
                return Err(GraphError::InvalidEdge { from: i, to: j, n });
            }
            adj[i * n + j] = true;
            if undirected {
                adj[j * n + i] = true;
            }
        }
        let g = Graph { n, adj };
        g.check_strongly_connected()?;
        Ok(g)
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.adj[i * self.n + j]
    }

    /// `a_ij` as a float.
    #[inline]
    pub fn weight(&self, i: usize, j: usize) -> f64 {
        if self.has_edge(i, j) {
            1.0
        } else {
            0.0
        }
    }

    pub fn out_degree(&self, i: usize) -> usize {
        assert!(i < self.n, "node {i} out of range");
        (0..self.n).filter(|&j| self.has_edge(i, j)).count()
    }

    pub fn in_degree(&self, i: usize) -> usize {
        assert!(i < self.n, "node {i} out of range");
        (0..self.n).filter(|&j| self.has_edge(j, i)).count()
    }

    /// Total number of directed edges, `sum_ij a_ij`.
    pub fn edge_count(&self) -> usize {
        self.adj.iter().filter(|&&a| a).count()
    }

    pub fn is_symmetric(&self) -> bool {
        (0..self.n).all(|i| (0..i).all(|j| self.has_edge(i, j) == self.has_edge(j, i)))
    }

    /// Directed edges as 0-based pairs in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in 0..self.n {
                if self.has_edge(i, j) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    /// Pairs `i < j` connected in both directions.
    pub fn undirected_edges(&self) -> Vec<(usize, usize)> {
        self.edges()
            .into_iter()
            .filter(|&(i, j)| i < j && self.has_edge(j, i))
            .collect()
    }

    /// Out-degrees sorted in descending order.
    pub fn degree_multiset(&self) -> Vec<usize> {
        let mut d: Vec<usize> = (0..self.n).map(|i| self.out_degree(i)).collect();
        d.sort_unstable_by(|a, b| b.cmp(a));
        d
    }

    pub fn is_strongly_connected(&self) -> bool {
        self.check_strongly_connected().is_ok()
    }

    fn check_strongly_connected(&self) -> Result<(), GraphError> {
        let forward = self.reachable_from(0, false);
        if let Some(v) = forward.iter().position(|&r| !r) {
            return Err(GraphError::NotStronglyConnected { from: 0, to: v });
        }
        let backward = self.reachable_from(0, true);
        if let Some(v) = backward.iter().position(|&r| !r) {
            return Err(GraphError::NotStronglyConnected { from: v, to: 0 });
        }
        Ok(())
    }

    fn reachable_from(&self, start: usize, reverse: bool) -> Vec<bool> {
        let mut seen = vec![false; self.n];
        let mut queue = VecDeque::from([start]);
        seen[start] = true;
        while let Some(u) = queue.pop_front() {
            for v in 0..self.n {
                let edge = if reverse { self.has_edge(v, u) } else { self.has_edge(u, v) };
                if edge && !seen[v] {
                    seen[v] = true;
                    queue.push_back(v);
                }
            }
        }
        seen
    }

    /// Returns a copy with edge `i -> j` (and `j -> i` if `undirected`) added.
    pub fn add_edge(&self, i: usize, j: usize, undirected: bool) -> Result<Graph, GraphError> {
        if i >= self.n || j >= self.n || i == j {
            return Err(GraphError::InvalidEdge { from: i, to: j, n: self.n });
        }
        if self.has_edge(i, j) {
            return Err(GraphError::EdgeExists { from: i, to: j });
        }
        if undirected && self.has_edge(j, i) {
            return Err(GraphError::EdgeExists { from: j, to: i });
        }
        let mut g = self.clone();
        g.adj[i * g.n + j] = true;
        if undirected {
            g.adj[j * g.n + i] = true;
        }
        Ok(g)
    }

    /// Unordered pairs `i < j` with neither direction present.
    pub fn absent_undirected_pairs(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for i in 0..self.n {
            for j in (i + 1)..self.n {
                if !self.has_edge(i, j) && !self.has_edge(j, i) {
                    out.push((i, j));
                }
            }
        }
        out
    }

    pub fn to_spec(&self) -> GraphSpec {
        if self.is_symmetric() {
            GraphSpec {
                n: self.n,
                undirected: true,
                edges: self.undirected_edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            }
        } else {
            GraphSpec {
                n: self.n,
                undirected: false,
                edges: self.edges().into_iter().map(|(i, j)| [i + 1, j + 1]).collect(),
            }
        }
    }
}

/// JSON form of a graph: `{"n": 6, "undirected": true, "edges": [[1,2], ...]}`
/// with 1-based node indices.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphSpec {
    pub n: usize,
    #[serde(default)]
    pub undirected: bool,
    pub edges: Vec<[usize; 2]>,
}

impl GraphSpec {
    pub fn build(&self) -> Result<Graph, GraphError> {
        let mut edges = Vec::with_capacity(self.edges.len());
        for &[i, j] in &self.edges {
            if i == 0 || j == 0 {
                // 0 is not a valid 1-based label; report it as out of range.
                return Err(GraphError::InvalidEdge {
                    from: i.wrapping_sub(1).min(self.n),
                    to: j.wrapping_sub(1).min(self.n),
                    n: self.n,
                });
            }
            edges.push((i - 1, j - 1));
        }
        Graph::from_edges(self.n, &edges, self.undirected)
    }
}

/// Undirected edge lists (1-based) of the six trees on six nodes, ordered by
/// descending maximum degree, then descending second-largest degree. The two
/// trees with degrees {3,2,2,1,1,1} are ordered broom (G4) before spider (G5).
const TREES: [(&str, [(usize, usize); 5]); 6] = [
    // star
    ("G1", [(1, 2), (1, 3), (1, 4), (1, 5), (1, 6)]),
    // {4,2,1,1,1,1}
    ("G2", [(1, 2), (1, 3), (1, 4), (1, 5), (2, 6)]),
    // double star {3,3,1,1,1,1}
    ("G3", [(1, 2), (1, 3), (1, 4), (2, 5), (2, 6)]),
    // broom: path 1..5 with a leaf on node 2
    ("G4", [(1, 2), (2, 3), (3, 4), (4, 5), (2, 6)]),
    // spider: path 1..5 with a leaf on node 3
    ("G5", [(1, 2), (2, 3), (3, 4), (4, 5), (3, 6)]),
    // path
    ("G6", [(1, 2), (2, 3), (3, 4), (4, 5), (5, 6)]),
];

/// The six non-isomorphic trees on six nodes, edges materialized in both
/// directions, labeled `G1`..`G6`.
pub fn tree_catalog() -> Vec<(String, Graph)> {
    TREES
        .iter()
        .map(|(name, edges)| {
            let zero: Vec<(usize, usize)> = edges.iter().map(|&(i, j)| (i - 1, j - 1)).collect();
            let g = Graph::from_edges(6, &zero, true).expect("catalog trees are connected");
            (name.to_string(), g)
        })
        .collect()
}

pub fn catalog_graph(name: &str) -> Result<Graph, GraphError> {
    tree_catalog()
        .into_iter()
        .find(|(label, _)| label.eq_ignore_ascii_case(name))
        .map(|(_, g)| g)
        .ok_or_else(|| GraphError::UnknownCatalogName(name.to_string()))
}

//! Network graphs and combination weights.
//!
//! Nodes are 0-indexed in memory and 1-indexed in the edge-list format.
//! Combination weights are stored so that entry `(l, k)` is the weight node
//! `k` gives to the intermediate estimate received from node `l`; every
//! column is a convex combination over `k`'s neighborhood.

use std::collections::VecDeque;
use std::fmt;

use rand::seq::SliceRandom;
use rand::Rng;

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Topology {
    adjacency: Vec<Vec<bool>>,
    neighborhoods: Vec<Vec<usize>>,
}

impl Topology {
    /// Build from undirected 0-indexed edges. Duplicate edges are merged;
    /// self-loops and out-of-range endpoints are rejected, as are
    /// disconnected graphs.
    pub fn from_edges(node_count: usize, edges: &[(usize, usize)]) -> Result<Self> {
        if node_count == 0 {
            return Err(Error::Argument("topology needs at least one node".into()));
        }
        let mut adjacency = vec![vec![false; node_count]; node_count];
        for &(i, j) in edges {
            if i >= node_count || j >= node_count {
                return Err(Error::Argument(format!(
                    "edge ({}, {}) references a node outside 1..={node_count}",
                    i + 1,
                    j + 1
                )));
            }
            if i == j {
                return Err(Error::Argument(format!("self-loop on node {}", i + 1)));
            }
            adjacency[i][j] = true;
            adjacency[j][i] = true;
        }
        let neighborhoods = (0..node_count)
            .map(|k| (0..node_count).filter(|&l| l == k || adjacency[k][l]).collect())
            .collect();
        let topology = Self {
            adjacency,
            neighborhoods,
        };
        topology.check_connected()?;
        Ok(topology)
    }

    pub fn single() -> Self {
        Self {
            adjacency: vec![vec![false]],
            neighborhoods: vec![vec![0]],
        }
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn is_adjacent(&self, l: usize, k: usize) -> bool {
        self.adjacency[l][k]
    }

    /// `N_k`, sorted, including `k` itself.
    pub fn neighborhood(&self, k: usize) -> &[usize] {
        &self.neighborhoods[k]
    }

    /// Neighbor count, excluding the node itself.
    pub fn degree(&self, k: usize) -> usize {
        self.neighborhoods[k].len() - 1
    }

    pub fn edge_count(&self) -> usize {
        self.edges().count()
    }

    pub fn mean_degree(&self) -> f64 {
        2.0 * self.edge_count() as f64 / self.node_count() as f64
    }

    /// Edges `(i, j)` with `i < j`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (usize, usize)> + '_ {
        let n = self.node_count();
        (0..n).flat_map(move |i| ((i + 1)..n).filter(move |&j| self.adjacency[i][j]).map(move |j| (i, j)))
    }

    fn check_connected(&self) -> Result<()> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut queue = VecDeque::from([0]);
        seen[0] = true;
        while let Some(k) = queue.pop_front() {
            for &l in &self.neighborhoods[k] {
                if !seen[l] {
                    seen[l] = true;
                    queue.push_back(l);
                }
            }
        }
        match seen.iter().position(|s| !s) {
            Some(node) => Err(Error::Disconnected { node: node + 1 }),
            None => Ok(()),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CombinationMatrix {
    n: usize,
    weights: Vec<f64>,
}

impl CombinationMatrix {
    pub fn identity(n: usize) -> Self {
        let mut weights = vec![0.0; n * n];
        for k in 0..n {
            weights[k * n + k] = 1.0;
        }
        Self { n, weights }
    }

    /// Rows indexed by `l`, columns by `k`.
    pub fn from_rows(rows: Vec<Vec<f64>>) -> Result<Self> {
        let n = rows.len();
        if let Some(bad) = rows.iter().find(|r| r.len() != n) {
            return Err(Error::Dimension {
                expected: n,
                actual: bad.len(),
            });
        }
        Ok(Self {
            n,
            weights: rows.into_iter().flatten().collect(),
        })
    }

    pub fn size(&self) -> usize {
        self.n
    }

    pub fn get(&self, l: usize, k: usize) -> f64 {
        self.weights[l * self.n + k]
    }

    fn set(&mut self, l: usize, k: usize, v: f64) {
        self.weights[l * self.n + k] = v;
    }

    pub fn column_sum(&self, k: usize) -> f64 {
        (0..self.n).map(|l| self.get(l, k)).sum()
    }

    pub fn row_sum(&self, l: usize) -> f64 {
        (0..self.n).map(|k| self.get(l, k)).sum()
    }
}

/// `c_{l,k} = 1 / max(deg k, deg l)` for neighbors, remaining mass on the
/// self-weight.
pub fn metropolis_weights(topology: &Topology) -> CombinationMatrix {
    let n = topology.node_count();
    let mut c = CombinationMatrix {
        n,
        weights: vec![0.0; n * n],
    };
    for k in 0..n {
        let mut off_diagonal = 0.0;
        for &l in topology.neighborhood(k) {
            if l != k {
                let w = 1.0 / topology.degree(k).max(topology.degree(l)) as f64;
                c.set(l, k, w);
                off_diagonal += w;
            }
        }
        // Rounding can leave -1e-16 when the neighbors take all the mass.
        c.set(k, k, (1.0 - off_diagonal).max(0.0));
    }
    c
}

pub const COLUMN_SUM_TOLERANCE: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    Dimension { matrix: usize, topology: usize },
    Negative { l: usize, k: usize, value: f64 },
    OutsideNeighborhood { l: usize, k: usize, value: f64 },
    ColumnSum { k: usize, sum: f64 },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Violation::Dimension { matrix, topology } => {
                write!(f, "matrix is {matrix}x{matrix} but topology has {topology} nodes")
            }
            Violation::Negative { l, k, value } => {
                write!(f, "c[{},{}] = {value} is negative", l + 1, k + 1)
            }
            Violation::OutsideNeighborhood { l, k, value } => write!(
                f,
                "c[{},{}] = {value} but node {} is not in the neighborhood of node {}",
                l + 1,
                k + 1,
                l + 1,
                k + 1
            ),
            Violation::ColumnSum { k, sum } => {
                write!(f, "weights received by node {} sum to {sum}", k + 1)
            }
        }
    }
}

/// Check non-negativity, the neighborhood sparsity pattern and unit column
/// sums. Every violation found is reported.
pub fn validate_combination(
    c: &CombinationMatrix,
    topology: &Topology,
) -> std::result::Result<(), Vec<Violation>> {
    let n = topology.node_count();
    if c.size() != n {
        return Err(vec![Violation::Dimension {
            matrix: c.size(),
            topology: n,
        }]);
    }
    let mut violations = Vec::new();
    for k in 0..n {
        for l in 0..n {
            let value = c.get(l, k);
            if value < 0.0 {
                violations.push(Violation::Negative { l, k, value });
            }
            if value != 0.0 && l != k && !topology.is_adjacent(l, k) {
                violations.push(Violation::OutsideNeighborhood { l, k, value });
            }
        }
        let sum = c.column_sum(k);
        if (sum - 1.0).abs() > COLUMN_SUM_TOLERANCE {
            violations.push(Violation::ColumnSum { k, sum });
        }
    }
    if violations.is_empty() {
        Ok(())
    } else {
        Err(violations)
    }
}

/// Random connected graph with about `target_mean_degree` neighbors per node:
/// a random spanning tree plus uniformly chosen extra edges.
pub fn random_connected_topology<R: Rng + ?Sized>(
    rng: &mut R,
    node_count: usize,
    target_mean_degree: f64,
) -> Result<Topology> {
    if node_count == 0 {
        return Err(Error::Argument("topology needs at least one node".into()));
    }
    if !(target_mean_degree >= 0.0 && target_mean_degree < node_count as f64) {
        return Err(Error::Argument(format!(
            "mean degree {target_mean_degree} must lie in [0, {node_count})"
        )));
    }
    if node_count == 1 {
        return Ok(Topology::single());
    }
    let max_edges = node_count * (node_count - 1) / 2;
    let target_edges = ((target_mean_degree * node_count as f64 / 2.0).round() as usize).min(max_edges);
    if target_edges < node_count - 1 {
        return Err(Error::Argument(format!(
            "mean degree {target_mean_degree} is too small for a connected graph on {node_count} nodes (need at least {:.3})",
            2.0 * (node_count - 1) as f64 / node_count as f64
        )));
    }

    let mut order: Vec<usize> = (0..node_count).collect();
    order.shuffle(rng);
    let mut edges = Vec::with_capacity(target_edges);
    for i in 1..node_count {
        let parent = order[rng.random_range(0..i)];
        edges.push(ordered(order[i], parent));
    }
    let mut remaining: Vec<(usize, usize)> = (0..node_count)
        .flat_map(|i| ((i + 1)..node_count).map(move |j| (i, j)))
        .filter(|e| !edges.contains(e))
        .collect();
    remaining.shuffle(rng);
    edges.extend(remaining.into_iter().take(target_edges - edges.len()));
    Topology::from_edges(node_count, &edges)
}

fn ordered(a: usize, b: usize) -> (usize, usize) {
    (a.min(b), a.max(b))
}

/// Parse the edge-list format: node count, then one `i j` pair per line
/// (1-indexed, undirected). `#` starts a comment.
pub fn load_topology(text: &str) -> Result<Topology> {
    let mut node_count: Option<usize> = None;
    let mut edges = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line_no = idx + 1;
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split_whitespace().collect();
        let parse = |s: &str| {
            s.parse::<usize>().map_err(|_| Error::Parse {
                line: line_no,
                message: format!("expected a positive integer, found `{s}`"),
            })
        };
        match node_count {
            None => {
                if fields.len() != 1 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "first line must hold the node count".into(),
                    });
                }
                let n = parse(fields[0])?;
                if n == 0 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: "node count must be at least 1".into(),
                    });
                }
                node_count = Some(n);
            }
            Some(n) => {
                if fields.len() != 2 {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("expected `i j`, found `{line}`"),
                    });
                }
                let (i, j) = (parse(fields[0])?, parse(fields[1])?);
                if i == 0 || j == 0 || i > n || j > n {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("node index out of range 1..={n}"),
                    });
                }
                if i == j {
                    return Err(Error::Parse {
                        line: line_no,
                        message: format!("self-loop on node {i}"),
                    });
                }
                edges.push((i - 1, j - 1));
            }
        }
    }
    let n = node_count.ok_or(Error::Parse {
        line: 1,
        message: "missing node count".into(),
    })?;
    Topology::from_edges(n, &edges)
}

pub fn save_topology(topology: &Topology) -> String {
    let mut out = format!("{}\n", topology.node_count());
    for (i, j) in topology.edges() {
        out.push_str(&format!("{} {}\n", i + 1, j + 1));
    }
    out
}

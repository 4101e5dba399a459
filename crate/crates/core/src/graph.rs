//! Directed communication topologies and their column-stochastic weights.
//!
//! Edge convention used everywhere in this crate: the ordered pair `(i, j)`
//! means agent `j` transmits to agent `i`. In-memory indices are 0-based; the
//! JSON form uses 1-based indices.

use std::collections::{BTreeSet, VecDeque};

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Tolerance for column sums of a weight matrix.
pub const COLUMN_SUM_TOL: f64 = 1e-12;

/// Default number of whole-graph resamples before giving up on strong connectivity.
pub const DEFAULT_MAX_ATTEMPTS: u32 = 10_000;

#[derive(Debug, Error, PartialEq)]
pub enum GraphError {
    #[error("a network needs at least one agent")]
    Empty,
    #[error("edge ({0}, {1}) is a self loop; self weights live on the diagonal")]
    SelfLoop(usize, usize),
    #[error("edge ({i}, {j}) is out of range for n = {n}")]
    OutOfRange { i: usize, j: usize, n: usize },
    #[error("invalid generator parameters: {0}")]
    InvalidParameters(String),
    #[error(
        "no strongly connected graph after {attempts} attempts (n = {n}, connect_prob = {prob}); \
         connect_prob is likely too low for this n"
    )]
    NotConnectedAfterRetries { n: usize, prob: f64, attempts: u32 },
    #[error("network is not strongly connected")]
    NotStronglyConnected,
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
}

/// A directed graph on `n` agents with derived neighbor lists.
#[derive(Debug, Clone, PartialEq)]
pub struct DirectedNetwork {
    n: usize,
    edges: BTreeSet<(usize, usize)>,
    in_neighbors: Vec<Vec<usize>>,
    out_neighbors: Vec<Vec<usize>>,
}

impl DirectedNetwork {
    /// Builds a network from 0-based `(receiver, sender)` pairs.
    pub fn new(n: usize, edges: impl IntoIterator<Item = (usize, usize)>) -> Result<Self, GraphError> {
        if n == 0 {
            return Err(GraphError::Empty);
        }
        let mut set = BTreeSet::new();
        for (i, j) in edges {
            if i >= n || j >= n {
                return Err(GraphError::OutOfRange { i, j, n });
            }
            if i == j {
                return Err(GraphError::SelfLoop(i, j));
            }
            set.insert((i, j));
        }
        let mut in_neighbors = vec![Vec::new(); n];
        let mut out_neighbors = vec![Vec::new(); n];
        for &(i, j) in &set {
            in_neighbors[i].push(j);
            out_neighbors[j].push(i);
        }
        Ok(Self { n, edges: set, in_neighbors, out_neighbors })
    }

    pub fn n(&self) -> usize {
        self.n
    }

    /// Edges in ascending `(receiver, sender)` order.
    pub fn edges(&self) -> impl ExactSizeIterator<Item = (usize, usize)> + '_ {
        self.edges.iter().copied()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, i: usize, j: usize) -> bool {
        self.edges.contains(&(i, j))
    }

    /// Agents that send to `i`.
    pub fn in_neighbors(&self, i: usize) -> &[usize] {
        &self.in_neighbors[i]
    }

    /// Agents that `j` sends to.
    pub fn out_neighbors(&self, j: usize) -> &[usize] {
        &self.out_neighbors[j]
    }

    pub fn max_in_degree(&self) -> usize {
        self.in_neighbors.iter().map(Vec::len).max().unwrap_or(0)
    }

    pub fn to_json(&self) -> GraphJson {
        GraphJson {
            n: self.n,
            edges: self.edges.iter().map(|&(i, j)| [i + 1, j + 1]).collect(),
        }
    }

    pub fn from_json(doc: &GraphJson) -> Result<Self, GraphError> {
        let mut edges = Vec::with_capacity(doc.edges.len());
        for &[i, j] in &doc.edges {
            if i == 0 || j == 0 {
                return Err(GraphError::OutOfRange { i, j, n: doc.n });
            }
            edges.push((i - 1, j - 1));
        }
        Self::new(doc.n, edges)
    }
}

/// On-disk graph document: `{ "n": int, "edges": [[i, j], ...] }`, 1-based.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct GraphJson {
    pub n: usize,
    pub edges: Vec<[usize; 2]>,
}

/// Samples a directed Erdős–Rényi graph conditioned on strong connectivity.
pub fn generate_erdos_renyi(n: usize, connect_prob: f64, seed: u64) -> Result<DirectedNetwork, GraphError> {
    generate_erdos_renyi_with_attempts(n, connect_prob, seed, DEFAULT_MAX_ATTEMPTS)
}

/// Like [`generate_erdos_renyi`] with an explicit rejection budget. Whole graphs
/// are resampled, so the result is distributed as ER conditioned on strong
/// connectivity.
pub fn generate_erdos_renyi_with_attempts(
    n: usize,
    connect_prob: f64,
    seed: u64,
    max_attempts: u32,
) -> Result<DirectedNetwork, GraphError> {
    if n < 2 {
        return Err(GraphError::InvalidParameters(format!("n must be >= 2, got {n}")));
    }
    if !(connect_prob > 0.0 && connect_prob <= 1.0) {
        return Err(GraphError::InvalidParameters(format!(
            "connect_prob must lie in (0, 1], got {connect_prob}"
        )));
    }
    if max_attempts == 0 {
        return Err(GraphError::InvalidParameters("max_attempts must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for _ in 0..max_attempts {
        let mut edges = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if i != j && rng.random::<f64>() < connect_prob {
                    edges.push((i, j));
                }
            }
        }
        let net = DirectedNetwork::new(n, edges)?;
        if check_strong_connectivity(&net) {
            return Ok(net);
        }
    }
    Err(GraphError::NotConnectedAfterRetries { n, prob: connect_prob, attempts: max_attempts })
}

/// True iff every agent reaches every other agent. Runs one forward and one
/// backward reachability sweep from agent 0.
pub fn check_strong_connectivity(net: &DirectedNetwork) -> bool {
    let forward = reach_count(net.n, |v| net.out_neighbors(v));
    forward == net.n && reach_count(net.n, |v| net.in_neighbors(v)) == net.n
}

fn reach_count<'a>(n: usize, next: impl Fn(usize) -> &'a [usize]) -> usize {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([0]);
    seen[0] = true;
    let mut count = 1;
    while let Some(v) = queue.pop_front() {
        for &w in next(v) {
            if !seen[w] {
                seen[w] = true;
                count += 1;
                queue.push_back(w);
            }
        }
    }
    count
}

/// Column-stochastic weight matrix `P` attached to a network.
///
/// `P[(i, j)]` is the weight agent `i` puts on what it receives from `j`, and
/// is non-zero exactly on the diagonal and on the network's edges.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightMatrix {
    p: DMatrix<f64>,
}

impl WeightMatrix {
    /// Validates an arbitrary matrix against `net`.
    pub fn from_matrix(net: &DirectedNetwork, p: DMatrix<f64>) -> Result<Self, GraphError> {
        let n = net.n();
        if p.nrows() != n || p.ncols() != n {
            return Err(GraphError::InvalidWeights(format!(
                "expected {n}x{n}, got {}x{}",
                p.nrows(),
                p.ncols()
            )));
        }
        for j in 0..n {
            for i in 0..n {
                let w = p[(i, j)];
                if !(0.0..=1.0).contains(&w) {
                    return Err(GraphError::InvalidWeights(format!("entry ({i}, {j}) = {w} outside [0, 1]")));
                }
                let structural = i == j || net.has_edge(i, j);
                if structural && w == 0.0 {
                    return Err(GraphError::InvalidWeights(format!("entry ({i}, {j}) must be non-zero")));
                }
                if !structural && w != 0.0 {
                    return Err(GraphError::InvalidWeights(format!(
                        "entry ({i}, {j}) = {w} but ({i}, {j}) is not an edge"
                    )));
                }
            }
            let sum: f64 = p.column(j).sum();
            if (sum - 1.0).abs() > COLUMN_SUM_TOL {
                return Err(GraphError::InvalidWeights(format!("column {j} sums to {sum}")));
            }
        }
        Ok(Self { p })
    }

    pub fn n(&self) -> usize {
        self.p.nrows()
    }

    pub fn matrix(&self) -> &DMatrix<f64> {
        &self.p
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.p[(i, j)]
    }

    pub fn self_weight(&self, i: usize) -> f64 {
        self.p[(i, i)]
    }

    /// Row-major copy, used when persisting the matrix.
    pub fn rows(&self) -> Vec<Vec<f64>> {
        (0..self.n()).map(|i| self.p.row(i).iter().copied().collect()).collect()
    }

    pub fn column_sums(&self) -> Vec<f64> {
        self.p.column_iter().map(|c| c.sum()).collect()
    }
}

/// Out-degree equal-neighbor rule: `p_ij = 1 / (1 + outdeg(j))` for
/// `i` in `{j} ∪ out(j)`, zero elsewhere.
pub fn equal_neighbor_weights(net: &DirectedNetwork) -> Result<WeightMatrix, GraphError> {
    if !check_strong_connectivity(net) {
        return Err(GraphError::NotStronglyConnected);
    }
    let n = net.n();
    let mut p = DMatrix::zeros(n, n);
    for j in 0..n {
        let w = 1.0 / (1 + net.out_neighbors(j).len()) as f64;
        p[(j, j)] = w;
        for &i in net.out_neighbors(j) {
            p[(i, j)] = w;
        }
    }
    WeightMatrix::from_matrix(net, p)
}

/// Returns `(P_hat, P_tilde)`: `P` with its diagonal removed, and
/// `diag(p_ii - 1) + P_hat`, whose columns all sum to zero.
pub fn split_weight_matrix(weights: &WeightMatrix) -> (DMatrix<f64>, DMatrix<f64>) {
    let n = weights.n();
    let mut p_hat = weights.matrix().clone();
    for i in 0..n {
        p_hat[(i, i)] = 0.0;
    }
    let mut p_tilde = p_hat.clone();
    for i in 0..n {
        p_tilde[(i, i)] = weights.self_weight(i) - 1.0;
    }
    (p_hat, p_tilde)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cycle3() -> DirectedNetwork {
        // 1 -> 2 -> 3 -> 1, stored as (receiver, sender)
        DirectedNetwork::new(3, [(1, 0), (2, 1), (0, 2)]).unwrap()
    }

    #[test]
    fn complete_pair_is_forced() {
        for seed in 0..5 {
            let net = generate_erdos_renyi(2, 1.0, seed).unwrap();
            assert_eq!(net.edges().collect::<Vec<_>>(), vec![(0, 1), (1, 0)]);
        }
    }

    #[test]
    fn generation_is_deterministic() {
        let a = generate_erdos_renyi(10, 0.35, 42).unwrap();
        let b = generate_erdos_renyi(10, 0.35, 42).unwrap();
        assert_eq!(a, b);
        assert!(check_strong_connectivity(&a));
    }

    #[test]
    fn hopeless_probability_reports_diagnostic() {
        let err = generate_erdos_renyi_with_attempts(30, 0.001, 1, 20).unwrap_err();
        assert!(matches!(err, GraphError::NotConnectedAfterRetries { attempts: 20, .. }));
        assert!(err.to_string().contains("too low"));
    }

    #[test]
    fn rejects_bad_generator_parameters() {
        assert!(generate_erdos_renyi(1, 0.5, 0).is_err());
        assert!(generate_erdos_renyi(5, 0.0, 0).is_err());
        assert!(generate_erdos_renyi(5, 1.5, 0).is_err());
    }

    #[test]
    fn connectivity_examples() {
        assert!(check_strong_connectivity(&cycle3()));
        let path = DirectedNetwork::new(3, [(1, 0), (2, 1)]).unwrap();
        assert!(!check_strong_connectivity(&path));
    }

    #[test]
    fn rejects_self_loops_and_out_of_range() {
        assert_eq!(DirectedNetwork::new(2, [(1, 1)]), Err(GraphError::SelfLoop(1, 1)));
        assert!(matches!(DirectedNetwork::new(2, [(0, 2)]), Err(GraphError::OutOfRange { .. })));
        assert_eq!(DirectedNetwork::new(0, []), Err(GraphError::Empty));
    }

    #[test]
    fn out_degree_two_gives_thirds() {
        // node 0 sends to 1 and 2; 1 and 2 send back to 0
        let net = DirectedNetwork::new(3, [(1, 0), (2, 0), (0, 1), (0, 2)]).unwrap();
        let w = equal_neighbor_weights(&net).unwrap();
        for i in 0..3 {
            assert_eq!(w.get(i, 0), 1.0 / 3.0);
        }
        assert_eq!(w.get(0, 1), 0.5);
        assert_eq!(w.get(2, 1), 0.0);
    }

    #[test]
    fn complete_pair_weights_and_split() {
        let net = generate_erdos_renyi(2, 1.0, 0).unwrap();
        let w = equal_neighbor_weights(&net).unwrap();
        assert_eq!(w.matrix(), &DMatrix::from_element(2, 2, 0.5));
        let (p_hat, p_tilde) = split_weight_matrix(&w);
        assert_eq!(p_hat, DMatrix::from_row_slice(2, 2, &[0.0, 0.5, 0.5, 0.0]));
        assert_eq!(p_tilde, DMatrix::from_row_slice(2, 2, &[-0.5, 0.5, 0.5, -0.5]));
    }

    #[test]
    fn equal_neighbor_requires_strong_connectivity() {
        let path = DirectedNetwork::new(3, [(1, 0), (2, 1)]).unwrap();
        assert_eq!(equal_neighbor_weights(&path), Err(GraphError::NotStronglyConnected));
    }

    #[test]
    fn from_matrix_checks_invariants() {
        let net = cycle3();
        // row-stochastic but not column-stochastic
        let bad = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.5, 0.9, 0.1, 0.0, 0.0, 0.5, 0.5]);
        assert!(WeightMatrix::from_matrix(&net, bad).is_err());
        // weight on a non-edge
        let bad = DMatrix::from_row_slice(3, 3, &[0.5, 0.1, 0.5, 0.5, 0.4, 0.0, 0.0, 0.5, 0.5]);
        assert!(WeightMatrix::from_matrix(&net, bad).is_err());
        let good = DMatrix::from_row_slice(3, 3, &[0.5, 0.0, 0.5, 0.5, 0.5, 0.0, 0.0, 0.5, 0.5]);
        assert!(WeightMatrix::from_matrix(&net, good).is_ok());
    }

    #[test]
    fn json_uses_one_based_indices() {
        let net = cycle3();
        let doc = net.to_json();
        assert_eq!(doc.edges, vec![[1, 3], [2, 1], [3, 2]]);
        let text = serde_json::to_string(&doc).unwrap();
        let back: GraphJson = serde_json::from_str(&text).unwrap();
        assert_eq!(DirectedNetwork::from_json(&back).unwrap(), net);
        let zero = GraphJson { n: 2, edges: vec![[0, 1]] };
        assert!(DirectedNetwork::from_json(&zero).is_err());
    }
}

//! Weighted directed spillover network and its topology statistics.
//!
//! `W[i][j]` is the spillover weight from node `i` to node `j`. Path-based
//! metrics use unweighted hop counts over the edges with `W > 0`.

use std::collections::{HashMap, HashSet, VecDeque};
use std::fmt::Write as _;

use log::warn;
use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

pub const DEFAULT_ALPHA: f64 = 0.05;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum NetworkError {
    #[error("expected {expected} directional tests, {missing} ordered pairs missing (e.g. {example})")]
    IncompletePairSet {
        expected: usize,
        missing: usize,
        example: String,
    },
    #[error("test refers to unknown node {0}")]
    UnknownNode(String),
    #[error("duplicate test for {0} -> {1}")]
    DuplicateTest(String, String),
    #[error("network has no edges")]
    EmptyNetwork,
    #[error("need at least 2 nodes, got {0}")]
    TooFewNodes(usize),
    #[error("invalid weight matrix: {0}")]
    InvalidWeights(String),
}

/// Outcome of the fit behind a directional test.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TestStatus {
    Tested,
    /// Parameter covariance unavailable or the tested block was singular.
    Untestable,
    /// The optimiser stopped without meeting the gradient tolerance.
    NotConverged,
}

/// Directional Wald test result for one ordered pair of nodes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpilloverTest {
    pub from: String,
    pub to: String,
    pub a_off: f64,
    pub b_off: f64,
    pub weight: f64,
    pub wald_stat: Option<f64>,
    pub p_value: Option<f64>,
    pub status: TestStatus,
}

impl SpilloverTest {
    /// Whether this direction enters the network at level `alpha`.
    pub fn is_significant(&self, alpha: f64) -> bool {
        self.status == TestStatus::Tested && self.p_value.is_some_and(|p| p < alpha)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NetworkTopology {
    pub nd: f64,
    pub ne: f64,
    pub nc: f64,
    pub nh: f64,
    pub edge_count: usize,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SpilloverNetwork {
    node_ids: Vec<String>,
    weights: DMatrix<f64>,
    significance_level: f64,
}

impl SpilloverNetwork {
    pub fn from_weights(
        node_ids: Vec<String>,
        weights: DMatrix<f64>,
        significance_level: f64,
    ) -> Result<Self, NetworkError> {
        let n = node_ids.len();
        if n < 2 {
            return Err(NetworkError::TooFewNodes(n));
        }
        if weights.nrows() != n || weights.ncols() != n {
            return Err(NetworkError::InvalidWeights(format!(
                "{}x{} matrix for {n} nodes",
                weights.nrows(),
                weights.ncols()
            )));
        }
        for i in 0..n {
            for j in 0..n {
                let w = weights[(i, j)];
                if !w.is_finite() || w < 0.0 {
                    return Err(NetworkError::InvalidWeights(format!("W[{i}][{j}] = {w}")));
                }
                if i == j && w != 0.0 {
                    return Err(NetworkError::InvalidWeights(format!("non-zero diagonal at {i}")));
                }
            }
        }
        let unique: HashSet<&String> = node_ids.iter().collect();
        if unique.len() != n {
            return Err(NetworkError::InvalidWeights("duplicate node id".into()));
        }
        Ok(Self {
            node_ids,
            weights,
            significance_level,
        })
    }

    /// Network on nodes `0..n` (named by index) with the given weighted edges.
    pub fn from_edges(n: usize, edges: &[(usize, usize, f64)]) -> Result<Self, NetworkError> {
        let mut w = DMatrix::zeros(n, n);
        for &(i, j, x) in edges {
            if i >= n || j >= n {
                return Err(NetworkError::InvalidWeights(format!("edge {i}->{j} out of range")));
            }
            w[(i, j)] = x;
        }
        Self::from_weights((0..n).map(|k| k.to_string()).collect(), w, DEFAULT_ALPHA)
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn weights(&self) -> &DMatrix<f64> {
        &self.weights
    }

    pub fn significance_level(&self) -> f64 {
        self.significance_level
    }

    pub fn n_nodes(&self) -> usize {
        self.node_ids.len()
    }

    pub fn has_edge(&self, from: usize, to: usize) -> bool {
        self.weights[(from, to)] > 0.0
    }

    pub fn edge_count(&self) -> usize {
        self.weights.iter().filter(|w| **w > 0.0).count()
    }

    /// Edges as `(from, to, weight)` in row-major order.
    pub fn edges(&self) -> Vec<(usize, usize, f64)> {
        let n = self.n_nodes();
        let mut out = Vec::new();
        for i in 0..n {
            for j in 0..n {
                if self.has_edge(i, j) {
                    out.push((i, j, self.weights[(i, j)]));
                }
            }
        }
        out
    }

    /// Hop distances `d[i][j]` along directed edges; `None` if unreachable.
    pub fn hop_distances(&self) -> Vec<Vec<Option<usize>>> {
        let n = self.n_nodes();
        let adj: Vec<Vec<usize>> = (0..n)
            .map(|i| (0..n).filter(|&j| self.has_edge(i, j)).collect())
            .collect();
        (0..n)
            .map(|src| {
                let mut dist = vec![None; n];
                dist[src] = Some(0);
                let mut queue = VecDeque::from([src]);
                while let Some(u) = queue.pop_front() {
                    let du = dist[u].unwrap();
                    for &v in &adj[u] {
                        if dist[v].is_none() {
                            dist[v] = Some(du + 1);
                            queue.push_back(v);
                        }
                    }
                }
                dist
            })
            .collect()
    }

    pub fn density(&self) -> f64 {
        let n = self.n_nodes() as f64;
        self.edge_count() as f64 / (n * (n - 1.0))
    }

    /// Mean inverse hop distance over ordered pairs.
    pub fn global_efficiency(&self) -> f64 {
        let n = self.n_nodes();
        let d = self.hop_distances();
        let mut sum = 0.0;
        for (i, row) in d.iter().enumerate() {
            for (j, l) in row.iter().enumerate() {
                if i != j {
                    if let Some(l) = l {
                        sum += 1.0 / *l as f64;
                    }
                }
            }
        }
        sum / (n * (n - 1)) as f64
    }

    /// `(symmetric, reachable, unreachable)` counts over unordered pairs.
    fn pair_reachability(&self) -> (usize, usize, usize) {
        let n = self.n_nodes();
        let d = self.hop_distances();
        let (mut both, mut any, mut none) = (0, 0, 0);
        for i in 0..n {
            for j in i + 1..n {
                let fwd = d[i][j].is_some();
                let back = d[j][i].is_some();
                if fwd && back {
                    both += 1;
                }
                if fwd || back {
                    any += 1;
                } else {
                    none += 1;
                }
            }
        }
        (both, any, none)
    }

    pub fn connectivity(&self) -> f64 {
        let n = self.n_nodes();
        let (_, _, v) = self.pair_reachability();
        1.0 - v as f64 / (n * (n - 1) / 2) as f64
    }

    /// `1 - S / MAX(S)`; zero when no pair is reachable at all.
    pub fn hierarchy(&self) -> f64 {
        let (s, max_s, _) = self.pair_reachability();
        if max_s == 0 {
            0.0
        } else {
            1.0 - s as f64 / max_s as f64
        }
    }

    pub fn topology(&self) -> NetworkTopology {
        NetworkTopology {
            nd: self.density(),
            ne: self.global_efficiency(),
            nc: self.connectivity(),
            nh: self.hierarchy(),
            edge_count: self.edge_count(),
        }
    }

    /// Cumulative weight share against rank fraction, heaviest edges first.
    pub fn weighted_edge_cumulative(&self) -> Result<Vec<(f64, f64)>, NetworkError> {
        let mut w: Vec<f64> = self.weights.iter().copied().filter(|w| *w > 0.0).collect();
        if w.is_empty() {
            return Err(NetworkError::EmptyNetwork);
        }
        w.sort_by(|a, b| b.total_cmp(a));
        let total: f64 = w.iter().sum();
        let m = w.len();
        let mut acc = 0.0;
        let mut out = Vec::with_capacity(m);
        for (k, x) in w.iter().enumerate() {
            acc += x;
            let y = if k + 1 == m { 1.0 } else { (acc / total).min(1.0) };
            out.push(((k + 1) as f64 / m as f64, y));
        }
        Ok(out)
    }

    /// Dense weight matrix as CSV with a header row and a node column.
    pub fn adjacency_csv(&self) -> String {
        let mut s = String::from("node");
        for id in &self.node_ids {
            let _ = write!(s, ",{id}");
        }
        s.push('\n');
        for (i, id) in self.node_ids.iter().enumerate() {
            s.push_str(id);
            for j in 0..self.n_nodes() {
                let _ = write!(s, ",{}", self.weights[(i, j)]);
            }
            s.push('\n');
        }
        s
    }

    /// Graphviz digraph with weight-labelled edges.
    pub fn to_dot(&self, name: &str) -> String {
        let mut s = format!("digraph \"{name}\" {{\n");
        for id in &self.node_ids {
            let _ = writeln!(s, "  \"{id}\";");
        }
        for (i, j, w) in self.edges() {
            let _ = writeln!(
                s,
                "  \"{}\" -> \"{}\" [weight={w}, label=\"{w:.3}\"];",
                self.node_ids[i], self.node_ids[j]
            );
        }
        s.push_str("}\n");
        s
    }
}

/// Keeps directions significant at `alpha`. Every ordered pair of distinct
/// nodes must be covered exactly once.
pub fn build_network(
    tests: &[SpilloverTest],
    nodes: &[String],
    alpha: f64,
) -> Result<SpilloverNetwork, NetworkError> {
    let n = nodes.len();
    if n < 2 {
        return Err(NetworkError::TooFewNodes(n));
    }
    let index: HashMap<&str, usize> = nodes.iter().enumerate().map(|(k, id)| (id.as_str(), k)).collect();
    let mut seen = DMatrix::from_element(n, n, false);
    let mut w = DMatrix::zeros(n, n);
    for t in tests {
        let i = *index
            .get(t.from.as_str())
            .ok_or_else(|| NetworkError::UnknownNode(t.from.clone()))?;
        let j = *index
            .get(t.to.as_str())
            .ok_or_else(|| NetworkError::UnknownNode(t.to.clone()))?;
        if i == j {
            return Err(NetworkError::InvalidWeights(format!("self-test on {}", t.from)));
        }
        if seen[(i, j)] {
            return Err(NetworkError::DuplicateTest(t.from.clone(), t.to.clone()));
        }
        seen[(i, j)] = true;
        match t.status {
            TestStatus::Tested => {}
            TestStatus::Untestable => warn!("{} -> {} untestable, weight set to 0", t.from, t.to),
            TestStatus::NotConverged => warn!("{} -> {} fit did not converge, weight set to 0", t.from, t.to),
        }
        if t.is_significant(alpha) {
            w[(i, j)] = t.weight;
        }
    }
    let mut missing = Vec::new();
    for i in 0..n {
        for j in 0..n {
            if i != j && !seen[(i, j)] {
                missing.push(format!("{} -> {}", nodes[i], nodes[j]));
            }
        }
    }
    if !missing.is_empty() {
        return Err(NetworkError::IncompletePairSet {
            expected: n * (n - 1),
            missing: missing.len(),
            example: missing[0].clone(),
        });
    }
    SpilloverNetwork::from_weights(nodes.to_vec(), w, alpha)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn test(from: &str, to: &str, weight: f64, p: f64) -> SpilloverTest {
        SpilloverTest {
            from: from.into(),
            to: to.into(),
            a_off: weight / 2.0,
            b_off: weight / 2.0,
            weight,
            wald_stat: Some(1.0),
            p_value: Some(p),
            status: TestStatus::Tested,
        }
    }

    fn names(n: usize) -> Vec<String> {
        (0..n).map(|k| format!("c{k}")).collect()
    }

    #[test]
    fn selects_significant_directions() {
        let nodes = names(3);
        let tests = vec![
            test("c0", "c1", 0.5, 0.01),
            test("c1", "c0", 0.4, 0.99),
            test("c0", "c2", 0.3, 0.049),
            test("c2", "c0", 0.2, 0.05),
            test("c1", "c2", 0.6, 0.2),
            test("c2", "c1", 0.7, 0.001),
        ];
        let net = build_network(&tests, &nodes, 0.05).unwrap();
        let expected = DMatrix::from_row_slice(3, 3, &[0.0, 0.5, 0.3, 0.0, 0.0, 0.0, 0.0, 0.7, 0.0]);
        assert_eq!(net.weights(), &expected);
        assert_eq!(net.edge_count(), 3);
    }

    #[test]
    fn all_insignificant_gives_empty_network() {
        let nodes = names(3);
        let mut tests = Vec::new();
        for a in &nodes {
            for b in &nodes {
                if a != b {
                    tests.push(test(a, b, 0.4, 1.0));
                }
            }
        }
        let net = build_network(&tests, &nodes, 0.05).unwrap();
        assert_eq!(net.edge_count(), 0);
        let t = net.topology();
        assert_eq!((t.nd, t.ne, t.nc, t.nh), (0.0, 0.0, 0.0, 0.0));
        assert_eq!(net.weighted_edge_cumulative(), Err(NetworkError::EmptyNetwork));
    }

    #[test]
    fn untestable_and_missing_pairs() {
        let nodes = names(2);
        let mut t = test("c0", "c1", 0.9, 0.0);
        t.status = TestStatus::Untestable;
        let err = build_network(std::slice::from_ref(&t), &nodes, 0.05).unwrap_err();
        assert!(matches!(err, NetworkError::IncompletePairSet { expected: 2, missing: 1, .. }));
        let net = build_network(&[t, test("c1", "c0", 0.2, 0.01)], &nodes, 0.05).unwrap();
        assert_eq!(net.weights()[(0, 1)], 0.0);
        assert_eq!(net.weights()[(1, 0)], 0.2);
        let dup = build_network(&[test("c1", "c0", 0.2, 0.01), test("c1", "c0", 0.2, 0.01)], &nodes, 0.05);
        assert!(matches!(dup, Err(NetworkError::DuplicateTest(..))));
        let unknown = build_network(&[test("x", "c0", 0.2, 0.01)], &nodes, 0.05);
        assert!(matches!(unknown, Err(NetworkError::UnknownNode(_))));
    }

    #[test]
    fn sixteen_nodes_need_240_tests() {
        let nodes = names(16);
        let mut tests = Vec::new();
        for a in &nodes {
            for b in &nodes {
                if a != b {
                    tests.push(test(a, b, 0.1, 0.5));
                }
            }
        }
        assert_eq!(tests.len(), 240);
        assert!(build_network(&tests, &nodes, 0.05).is_ok());
        tests.pop();
        assert!(build_network(&tests, &nodes, 0.05).is_err());
    }

    #[test]
    fn complete_graph_metrics() {
        let edges: Vec<_> = (0..3)
            .flat_map(|i| (0..3).filter(move |&j| j != i).map(move |j| (i, j, 1.0)))
            .collect();
        let t = SpilloverNetwork::from_edges(3, &edges).unwrap().topology();
        assert_eq!((t.nd, t.ne, t.nc, t.nh, t.edge_count), (1.0, 1.0, 1.0, 0.0, 6));
    }

    #[test]
    fn directed_three_cycle() {
        let net = SpilloverNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0), (2, 0, 1.0)]).unwrap();
        assert!((net.global_efficiency() - 0.75).abs() < 1e-15);
        assert_eq!(net.hierarchy(), 0.0);
        assert_eq!(net.connectivity(), 1.0);
    }

    #[test]
    fn chain_and_star() {
        let chain = SpilloverNetwork::from_edges(3, &[(0, 1, 1.0), (1, 2, 1.0)]).unwrap();
        assert_eq!(chain.connectivity(), 1.0);
        assert_eq!(chain.hierarchy(), 1.0);
        let star = SpilloverNetwork::from_edges(4, &[(0, 1, 1.0), (0, 2, 1.0), (0, 3, 1.0)]).unwrap();
        assert_eq!(star.hierarchy(), 1.0);
        assert_eq!(star.connectivity(), 0.5);
        let isolated = SpilloverNetwork::from_edges(2, &[]).unwrap();
        assert_eq!(isolated.connectivity(), 0.0);
    }

    #[test]
    fn cumulative_curve_examples() {
        let net = SpilloverNetwork::from_edges(2, &[(0, 1, 1.0), (1, 0, 3.0)]).unwrap();
        assert_eq!(net.weighted_edge_cumulative().unwrap(), vec![(0.5, 0.75), (1.0, 1.0)]);
        let eq = SpilloverNetwork::from_edges(3, &[(0, 1, 0.2), (1, 2, 0.2), (2, 0, 0.2), (0, 2, 0.2)]).unwrap();
        for (x, y) in eq.weighted_edge_cumulative().unwrap() {
            assert!((x - y).abs() < 1e-15);
        }
    }

    #[test]
    fn weight_validation() {
        let bad_diag = DMatrix::from_row_slice(2, 2, &[1.0, 0.0, 0.0, 0.0]);
        assert!(SpilloverNetwork::from_weights(names(2), bad_diag, 0.05).is_err());
        let negative = DMatrix::from_row_slice(2, 2, &[0.0, -1.0, 0.0, 0.0]);
        assert!(SpilloverNetwork::from_weights(names(2), negative, 0.05).is_err());
        assert!(SpilloverNetwork::from_weights(names(1), DMatrix::zeros(1, 1), 0.05).is_err());
    }

    #[test]
    fn csv_and_dot_output() {
        let net = SpilloverNetwork::from_edges(2, &[(0, 1, 0.25)]).unwrap();
        assert_eq!(net.adjacency_csv(), "node,0,1\n0,0,0.25\n1,0,0\n");
        let dot = net.to_dot("g");
        assert!(dot.contains("\"0\" -> \"1\" [weight=0.25, label=\"0.250\"];"));
    }

    fn arb_network() -> impl Strategy<Value = SpilloverNetwork> {
        (2usize..7).prop_flat_map(|n| {
            proptest::collection::vec(prop_oneof![Just(0.0), 0.01f64..2.0], n * n).prop_map(move |v| {
                let mut w = DMatrix::from_row_slice(n, n, &v);
                w.fill_diagonal(0.0);
                SpilloverNetwork::from_weights((0..n).map(|k| k.to_string()).collect(), w, 0.05).unwrap()
            })
        })
    }

    proptest! {
        #[test]
        fn metrics_stay_in_unit_interval(net in arb_network()) {
            let t = net.topology();
            for v in [t.nd, t.ne, t.nc, t.nh] {
                prop_assert!((0.0..=1.0).contains(&v));
            }
        }

        #[test]
        fn adding_an_edge_never_lowers_nd_ne_nc(net in arb_network(), pick in 0usize..1000) {
            let n = net.n_nodes();
            let absent: Vec<(usize, usize)> = (0..n)
                .flat_map(|i| (0..n).map(move |j| (i, j)))
                .filter(|&(i, j)| i != j && !net.has_edge(i, j))
                .collect();
            prop_assume!(!absent.is_empty());
            let (i, j) = absent[pick % absent.len()];
            let mut w = net.weights().clone();
            w[(i, j)] = 1.0;
            let bigger = SpilloverNetwork::from_weights(net.node_ids().to_vec(), w, 0.05).unwrap();
            prop_assert!(bigger.density() >= net.density());
            prop_assert!(bigger.global_efficiency() >= net.global_efficiency());
            prop_assert!(bigger.connectivity() >= net.connectivity());
        }

        #[test]
        fn cumulative_curve_is_monotone_and_ends_at_one(net in arb_network()) {
            prop_assume!(net.edge_count() > 0);
            let curve = net.weighted_edge_cumulative().unwrap();
            for pair in curve.windows(2) {
                prop_assert!(pair[1].0 > pair[0].0);
                prop_assert!(pair[1].1 >= pair[0].1);
            }
            let last = curve.last().unwrap();
            prop_assert!((last.1 - 1.0).abs() <= 1e-12);
            prop_assert_eq!(last.0, 1.0);
        }
    }
}

//! Synthetic BEKK processes.
//!
//! Randomness comes from `ChaCha8Rng` seeded with a `u64` and standard
//! normal draws from `rand_distr`, so output is identical across platforms.
//!
//! [`simulate_panel`] builds an `N`-dimensional BEKK(1,1) whose loading
//! matrices are diagonal except for the planted edges: an edge
//! `from -> to` sets `A[from][to] = a_off` and `B[from][to] = b_off`, which
//! feeds shocks and variance of `from` into the conditional variance of
//! `to`. The constant `C` is diagonal and each node has its own AR(1) mean.
//! Without planted edges every pair of columns is exactly a bivariate
//! diagonal BEKK with zero spillover coefficients, and the columns are
//! uncorrelated (their conditional covariances still co-move through the
//! diagonal ARCH and GARCH terms).

use chrono::NaiveDate;
use nalgebra::{DMatrix, DVector, Matrix2, Vector2};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::bekk::BekkParams;
use crate::panel::SeriesPanel;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimError {
    #[error("specification is not covariance stationary (persistence {0:.4})")]
    NonStationarySpec(f64),
    #[error("invalid edge list: {0}")]
    InvalidEdgeList(String),
    #[error("need at least 2 nodes")]
    TooFewNodes,
    #[error("series length must be at least 1")]
    EmptySeries,
    #[error("conditional covariance lost positive definiteness at step {0}")]
    NotPositiveDefinite(usize),
    #[error("{0}")]
    Panel(String),
}

/// Bivariate simulation request.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SimSpec {
    pub params: BekkParams,
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
}

impl SimSpec {
    /// Spec with the default burn-in of 500 steps.
    pub fn new(params: BekkParams, t: usize, seed: u64) -> Self {
        Self {
            params,
            t,
            burn_in: 500,
            seed,
        }
    }
}

/// Draws a `t x 2` sample from the bivariate model.
pub fn simulate_bekk(spec: &SimSpec) -> Result<DMatrix<f64>, SimError> {
    if spec.t == 0 {
        return Err(SimError::EmptySeries);
    }
    let p = &spec.params;
    let persistence = p.persistence();
    if persistence >= 1.0 || p.mean_persistence() >= 1.0 {
        return Err(SimError::NonStationarySpec(persistence.max(p.mean_persistence())));
    }
    let mut x = p.unconditional_mean().ok_or(SimError::NonStationarySpec(persistence))?;
    let mut h = p
        .unconditional_covariance()
        .ok_or(SimError::NonStationarySpec(persistence))?;
    let cc = p.intercept();
    let at = p.a.transpose();
    let bt = p.b.transpose();
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.burn_in + spec.t;
    let mut out = DMatrix::zeros(spec.t, 2);
    let mut eps = Vector2::zeros();
    for step in 0..total {
        if step > 0 {
            let v = at * eps;
            h = cc + v * v.transpose() + bt * h * p.b;
        }
        let l = h
            .cholesky()
            .ok_or(SimError::NotPositiveDefinite(step))?
            .l();
        let z = Vector2::new(
            StandardNormal.sample(&mut rng),
            StandardNormal.sample(&mut rng),
        );
        eps = l * z;
        x = p.mu + p.phi * x + eps;
        if step >= spec.burn_in {
            let r = step - spec.burn_in;
            out[(r, 0)] = x[0];
            out[(r, 1)] = x[1];
        }
    }
    Ok(out)
}

/// A planted directed spillover for [`simulate_panel`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlantedEdge {
    pub from: usize,
    pub to: usize,
    pub a_off: f64,
    pub b_off: f64,
}

/// Own dynamics shared by every node of a simulated panel.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct NodeDynamics {
    pub mu: f64,
    pub phi: f64,
    pub c: f64,
    pub a: f64,
    pub b: f64,
}

impl Default for NodeDynamics {
    fn default() -> Self {
        Self {
            mu: 20.0,
            phi: 0.5,
            c: 2.0,
            a: 0.4,
            b: 0.88,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PanelSimSpec {
    pub n_nodes: usize,
    pub planted: Vec<PlantedEdge>,
    pub t: usize,
    pub burn_in: usize,
    pub seed: u64,
    pub start: NaiveDate,
    pub dynamics: NodeDynamics,
    /// Column names; defaults to `N01`, `N02`, ...
    pub node_ids: Option<Vec<String>>,
}

impl PanelSimSpec {
    pub fn new(n_nodes: usize, planted: Vec<PlantedEdge>, t: usize, seed: u64) -> Self {
        Self {
            n_nodes,
            planted,
            t,
            burn_in: 500,
            seed,
            start: NaiveDate::from_ymd_opt(2019, 1, 1).unwrap(),
            dynamics: NodeDynamics::default(),
            node_ids: None,
        }
    }

    pub fn node_ids(&self) -> Vec<String> {
        self.node_ids.clone().unwrap_or_else(|| {
            let width = self.n_nodes.to_string().len().max(2);
            (1..=self.n_nodes).map(|k| format!("N{k:0width$}")).collect()
        })
    }

    /// The bivariate parameters equivalent to a two-node panel.
    pub fn pair_params(&self, from_to: Option<(f64, f64)>) -> BekkParams {
        let d = self.dynamics;
        let (a_off, b_off) = from_to.unwrap_or((0.0, 0.0));
        BekkParams {
            mu: Vector2::new(d.mu, d.mu),
            phi: Matrix2::new(d.phi, 0.0, 0.0, d.phi),
            c: Matrix2::new(d.c, 0.0, 0.0, d.c),
            a: Matrix2::new(d.a, a_off, 0.0, d.a),
            b: Matrix2::new(d.b, b_off, 0.0, d.b),
        }
    }
}

fn kron(x: &DMatrix<f64>, y: &DMatrix<f64>) -> DMatrix<f64> {
    let (n, m) = (x.nrows(), y.nrows());
    DMatrix::from_fn(n * m, n * m, |r, c| x[(r / m, c / m)] * y[(r % m, c % m)])
}

/// Simulates an `N`-node panel with planted directed spillovers; see the
/// module docs for the construction.
pub fn simulate_panel(spec: &PanelSimSpec) -> Result<SeriesPanel, SimError> {
    let n = spec.n_nodes;
    if n < 2 {
        return Err(SimError::TooFewNodes);
    }
    if spec.t == 0 {
        return Err(SimError::EmptySeries);
    }
    let ids = spec.node_ids();
    if ids.len() != n {
        return Err(SimError::InvalidEdgeList(format!(
            "{} node ids for {n} nodes",
            ids.len()
        )));
    }
    let d = spec.dynamics;
    let mut a = DMatrix::from_diagonal_element(n, n, d.a);
    let mut b = DMatrix::from_diagonal_element(n, n, d.b);
    let mut seen = std::collections::HashSet::new();
    for e in &spec.planted {
        if e.from >= n || e.to >= n {
            return Err(SimError::InvalidEdgeList(format!(
                "edge {}->{} outside 0..{n}",
                e.from, e.to
            )));
        }
        if e.from == e.to {
            return Err(SimError::InvalidEdgeList(format!("self-loop on node {}", e.from)));
        }
        if !seen.insert((e.from, e.to)) {
            return Err(SimError::InvalidEdgeList(format!(
                "duplicate edge {}->{}",
                e.from, e.to
            )));
        }
        if !(e.a_off.is_finite() && e.b_off.is_finite()) {
            return Err(SimError::InvalidEdgeList("non-finite coefficient".into()));
        }
        a[(e.from, e.to)] = e.a_off;
        b[(e.from, e.to)] = e.b_off;
    }
    if d.phi.abs() >= 1.0 {
        return Err(SimError::NonStationarySpec(d.phi.abs()));
    }
    let k = kron(&a, &a) + kron(&b, &b);
    let persistence = k
        .clone()
        .complex_eigenvalues()
        .iter()
        .fold(0.0f64, |m, z| m.max(z.norm()));
    if persistence >= 1.0 {
        return Err(SimError::NonStationarySpec(persistence));
    }

    let cc = DMatrix::from_diagonal_element(n, n, d.c * d.c);
    // vec(H) = (I - A'(x)A' - B'(x)B')^-1 vec(C'C); Kronecker of transposes
    // is the transpose of the Kronecker product.
    let lhs = DMatrix::identity(n * n, n * n) - k.transpose();
    let vec_h = lhs
        .lu()
        .solve(&DVector::from_column_slice(cc.as_slice()))
        .ok_or(SimError::NonStationarySpec(persistence))?;
    let mut h = DMatrix::from_column_slice(n, n, vec_h.as_slice());
    h = (&h + h.transpose()) * 0.5;

    let at = a.transpose();
    let bt = b.transpose();
    let mut x = DVector::from_element(n, d.mu / (1.0 - d.phi));
    let mut eps = DVector::zeros(n);
    let mut z = DVector::zeros(n);
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let total = spec.burn_in + spec.t;
    let mut values = DMatrix::zeros(spec.t, n);
    for step in 0..total {
        if step > 0 {
            let v = &at * &eps;
            h = &cc + &v * v.transpose() + &bt * &h * &b;
        }
        let l = h
            .clone()
            .cholesky()
            .ok_or(SimError::NotPositiveDefinite(step))?
            .l();
        for zi in z.iter_mut() {
            *zi = StandardNormal.sample(&mut rng);
        }
        eps = &l * &z;
        for i in 0..n {
            x[i] = d.mu + d.phi * x[i] + eps[i];
        }
        if step >= spec.burn_in {
            values.row_mut(step - spec.burn_in).copy_from(&x.transpose());
        }
    }
    let dates = (0..spec.t)
        .map(|k| spec.start + chrono::Days::new(k as u64))
        .collect();
    SeriesPanel::new(ids, dates, values).map_err(|e| SimError::Panel(e.to_string()))
}

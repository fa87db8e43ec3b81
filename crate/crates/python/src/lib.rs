//! Python bindings: simulation, pairwise BEKK fits, network metrics,
//! diffusion indices, block models and the file-based pipeline.

use std::collections::BTreeMap;

use pyo3::exceptions::{PyIOError, PyValueError};
use pyo3::prelude::*;

use spillover_core::bekk::{self, Direction, FitOptions, PARAM_NAMES};
use spillover_core::blockmodel;
use spillover_core::diffusion::{self, CumulativeCurve, FlowDirection};
use spillover_core::network::SpilloverNetwork;
use spillover_core::nalgebra::DMatrix;
use spillover_core::panel::{self, PanelSchema};
use spillover_core::pipeline::{self, RunConfig, Target};
use spillover_core::simulate::{self, PanelSimSpec, PlantedEdge, SimSpec};

fn value_err(e: impl ToString) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn matrix(rows: &[Vec<f64>], cols: Option<usize>) -> PyResult<DMatrix<f64>> {
    let n = rows.len();
    let m = cols.unwrap_or_else(|| rows.first().map_or(0, Vec::len));
    if rows.iter().any(|r| r.len() != m) {
        return Err(value_err(format!("every row must have {m} values")));
    }
    Ok(DMatrix::from_fn(n, m, |i, j| rows[i][j]))
}

fn rows(m: &DMatrix<f64>) -> Vec<Vec<f64>> {
    m.row_iter().map(|r| r.iter().copied().collect()).collect()
}

fn direction(s: &str) -> PyResult<Direction> {
    match s {
        "first_to_second" | "12" => Ok(Direction::FirstToSecond),
        "second_to_first" | "21" => Ok(Direction::SecondToFirst),
        _ => Err(value_err("direction must be 'first_to_second' or 'second_to_first'")),
    }
}

fn flow(s: &str) -> PyResult<FlowDirection> {
    match s {
        "out" => Ok(FlowDirection::Out),
        "in" => Ok(FlowDirection::In),
        _ => Err(value_err("direction must be 'out' or 'in'")),
    }
}

/// A dated panel of node series.
#[pyclass(name = "Panel", module = "spillover")]
struct PyPanel {
    inner: panel::SeriesPanel,
}

#[pymethods]
impl PyPanel {
    #[staticmethod]
    #[pyo3(signature = (path, date_column=None, nodes=None))]
    fn from_csv(path: &str, date_column: Option<String>, nodes: Option<Vec<String>>) -> PyResult<Self> {
        let file = std::fs::File::open(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        let schema = PanelSchema {
            date_column,
            node_columns: nodes,
            ..PanelSchema::default()
        };
        let inner = panel::load_panel(std::io::BufReader::new(file), &schema).map_err(value_err)?;
        Ok(Self { inner })
    }

    fn to_csv(&self, path: &str) -> PyResult<()> {
        let file = std::fs::File::create(path).map_err(|e| PyIOError::new_err(format!("{path}: {e}")))?;
        self.inner.write_csv(std::io::BufWriter::new(file)).map_err(value_err)
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.node_ids().to_vec()
    }

    #[getter]
    fn dates(&self) -> Vec<String> {
        self.inner.dates().iter().map(|d| d.to_string()).collect()
    }

    /// Rows are dates, columns are nodes.
    #[getter]
    fn values(&self) -> Vec<Vec<f64>> {
        rows(self.inner.values())
    }

    fn pair(&self, i: usize, j: usize) -> PyResult<Vec<Vec<f64>>> {
        let n = self.inner.n_nodes();
        if i >= n || j >= n || i == j {
            return Err(value_err("pair indices must be distinct and in range"));
        }
        Ok(rows(&self.inner.pair(i, j)))
    }

    fn __len__(&self) -> usize {
        self.inner.len()
    }

    fn __repr__(&self) -> String {
        format!("Panel({} nodes x {} dates)", self.inner.n_nodes(), self.inner.len())
    }
}

/// Bivariate series of length `t`; `params` follows `PARAM_NAMES`.
#[pyfunction]
#[pyo3(signature = (params, t, seed, burn_in=500))]
fn simulate_bekk(params: Vec<f64>, t: usize, seed: u64, burn_in: usize) -> PyResult<Vec<Vec<f64>>> {
    if params.len() != bekk::N_PARAMS {
        return Err(value_err(format!("expected {} parameters", bekk::N_PARAMS)));
    }
    let mut spec = SimSpec::new(bekk::BekkParams::from_slice(&params), t, seed);
    spec.burn_in = burn_in;
    simulate::simulate_bekk(&spec).map(|m| rows(&m)).map_err(value_err)
}

/// Panel with planted `(from, to, a_off, b_off)` edges, 0-based nodes.
#[pyfunction]
#[pyo3(signature = (n_nodes, t, seed, edges=Vec::new()))]
fn simulate_panel(n_nodes: usize, t: usize, seed: u64, edges: Vec<(usize, usize, f64, f64)>) -> PyResult<PyPanel> {
    let planted = edges
        .into_iter()
        .map(|(from, to, a_off, b_off)| PlantedEdge { from, to, a_off, b_off })
        .collect();
    let inner = simulate::simulate_panel(&PanelSimSpec::new(n_nodes, planted, t, seed)).map_err(value_err)?;
    Ok(PyPanel { inner })
}

/// A fitted pair.
#[pyclass(name = "BekkFit", module = "spillover")]
struct PyBekkFit {
    inner: bekk::BekkFit,
}

#[pymethods]
impl PyBekkFit {
    #[getter]
    fn params(&self) -> BTreeMap<&'static str, f64> {
        PARAM_NAMES.iter().copied().zip(self.inner.params.to_vec()).collect()
    }

    #[getter]
    fn std_errors(&self) -> Option<BTreeMap<&'static str, f64>> {
        self.inner.std_errors().map(|se| PARAM_NAMES.iter().copied().zip(se).collect())
    }

    #[getter]
    fn loglik(&self) -> f64 {
        self.inner.loglik
    }

    #[getter]
    fn converged(&self) -> bool {
        self.inner.converged
    }

    #[getter]
    fn iterations(&self) -> usize {
        self.inner.iterations
    }

    #[getter]
    fn persistence(&self) -> f64 {
        self.inner.persistence
    }

    /// `(wald_stat, p_value)` for the joint test of the direction's
    /// off-diagonal coefficients.
    fn wald(&self, direction: &str) -> PyResult<(f64, f64)> {
        let w = bekk::wald_spillover(&self.inner, self::direction(direction)?).map_err(value_err)?;
        Ok((w.wald_stat, w.p_value))
    }

    /// `(a_off, b_off, weight)`.
    fn spillover_weight(&self, direction: &str) -> PyResult<(f64, f64, f64)> {
        Ok(bekk::spillover_weight(&self.inner, self::direction(direction)?))
    }
}

/// Fits the model to a `T x 2` array given as a list of rows.
#[pyfunction]
#[pyo3(signature = (data, seed=0, max_iter=500, robust=false))]
fn fit_bekk(data: Vec<Vec<f64>>, seed: u64, max_iter: usize, robust: bool) -> PyResult<PyBekkFit> {
    let x = matrix(&data, Some(2))?;
    let opts = FitOptions {
        seed,
        max_iter,
        robust,
        ..FitOptions::default()
    };
    let inner = bekk::fit_bekk(&x, &opts).map_err(value_err)?;
    Ok(PyBekkFit { inner })
}

#[pyclass(name = "Network", module = "spillover")]
struct PyNetwork {
    inner: SpilloverNetwork,
}

#[pymethods]
impl PyNetwork {
    #[new]
    #[pyo3(signature = (node_ids, weights, alpha=0.05))]
    fn new(node_ids: Vec<String>, weights: Vec<Vec<f64>>, alpha: f64) -> PyResult<Self> {
        let w = matrix(&weights, Some(node_ids.len()))?;
        let inner = SpilloverNetwork::from_weights(node_ids, w, alpha).map_err(value_err)?;
        Ok(Self { inner })
    }

    #[getter]
    fn node_ids(&self) -> Vec<String> {
        self.inner.node_ids().to_vec()
    }

    #[getter]
    fn weights(&self) -> Vec<Vec<f64>> {
        rows(self.inner.weights())
    }

    /// ND, NE, NC, NH and the edge count.
    fn topology(&self) -> BTreeMap<&'static str, f64> {
        let t = self.inner.topology();
        BTreeMap::from([
            ("nd", t.nd),
            ("ne", t.ne),
            ("nc", t.nc),
            ("nh", t.nh),
            ("edge_count", t.edge_count as f64),
        ])
    }

    fn local_spillover_index(&self, direction: &str) -> PyResult<Vec<Option<f64>>> {
        Ok(diffusion::local_spillover_index(&self.inner, flow(direction)?))
    }

    /// Block number (1-4) per node and the role of each block.
    #[pyo3(signature = (max_depth=blockmodel::DEFAULT_MAX_DEPTH, convergence=blockmodel::DEFAULT_CONVERGENCE))]
    fn block_model(&self, max_depth: usize, convergence: f64) -> PyResult<(Vec<usize>, Vec<Option<&'static str>>)> {
        let b = blockmodel::block_model(&self.inner, max_depth, convergence).map_err(value_err)?;
        Ok((b.assignment, b.roles.iter().map(|r| r.map(|r| r.label())).collect()))
    }

    fn to_dot(&self, name: &str) -> String {
        self.inner.to_dot(name)
    }
}

/// Binned cumulative distribution `(midpoints, proportions)`.
#[pyfunction]
#[pyo3(signature = (indices, bins=diffusion::DEFAULT_BINS))]
fn cumulative_distribution(indices: Vec<f64>, bins: usize) -> PyResult<(Vec<f64>, Vec<f64>)> {
    let c = diffusion::cumulative_distribution(&indices, bins).map_err(value_err)?;
    Ok((c.bin_midpoints, c.cumulative_proportion))
}

/// Area between two piecewise-linear curves given as `(x, y)` lists.
#[pyfunction]
fn pattern_shift(a: (Vec<f64>, Vec<f64>), b: (Vec<f64>, Vec<f64>)) -> PyResult<f64> {
    let a = CumulativeCurve::new(a.0, a.1).map_err(value_err)?;
    let b = CumulativeCurve::new(b.0, b.1).map_err(value_err)?;
    diffusion::pattern_shift(&a, &b).map_err(value_err)
}

#[pyfunction]
fn resilience(s_lockdown: f64, s_recovery: f64) -> PyResult<f64> {
    diffusion::resilience(s_lockdown, s_recovery).map_err(value_err)
}

/// Runs every stage from a config file and returns the number of fits per
/// period.
#[pyfunction]
#[pyo3(signature = (config_path, out=None, jobs=None))]
fn run_pipeline(config_path: &str, out: Option<String>, jobs: Option<usize>) -> PyResult<BTreeMap<String, usize>> {
    let mut c = RunConfig::from_file(config_path.as_ref()).map_err(value_err)?;
    if let Some(o) = out {
        c.output = o.into();
    }
    if let Some(j) = jobs {
        c.jobs = j;
    }
    let report = pipeline::run_pipeline(&c, Target::Pipeline).map_err(value_err)?;
    Ok(report.periods.iter().map(|p| (p.period.name.clone(), p.fits.len())).collect())
}

#[pymodule]
fn spillover(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("PARAM_NAMES", PARAM_NAMES.to_vec())?;
    m.add_class::<PyPanel>()?;
    m.add_class::<PyBekkFit>()?;
    m.add_class::<PyNetwork>()?;
    m.add_function(wrap_pyfunction!(simulate_bekk, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_panel, m)?)?;
    m.add_function(wrap_pyfunction!(fit_bekk, m)?)?;
    m.add_function(wrap_pyfunction!(cumulative_distribution, m)?)?;
    m.add_function(wrap_pyfunction!(pattern_shift, m)?)?;
    m.add_function(wrap_pyfunction!(resilience, m)?)?;
    m.add_function(wrap_pyfunction!(run_pipeline, m)?)?;
    Ok(())
}

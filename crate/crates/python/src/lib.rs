//! Python bindings: networks, study configs, and the study / estimate /
//! oracle / selftest entry points. Reports cross the boundary as JSON and come
//! back as plain dicts.

use std::path::PathBuf;

use pyo3::create_exception;
use pyo3::exceptions::PyException;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use nartmle::harness::{
    run_estimate, run_selftest, run_study, to_json, Environment, EstimateConfig, ExperimentConfig,
    StudyReport,
};
use nartmle::netgraph::{gen_block, gen_powerlaw, ring, AdjacencyGraph, Network};
use nartmle::seeds::SeedNode;

create_exception!(pynartmle, NartmleError, PyException);
create_exception!(pynartmle, ConfigError, NartmleError);
create_exception!(pynartmle, DataError, NartmleError);
create_exception!(pynartmle, NumericalError, NartmleError);

/// Same classes as the CLI exit codes.
fn py_err(e: nartmle::Error) -> PyErr {
    let msg = e.to_string();
    match e.exit_code() {
        1 => ConfigError::new_err(msg),
        2 => DataError::new_err(msg),
        _ => NumericalError::new_err(msg),
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let bytes = to_json(value).map_err(py_err)?;
    let text = String::from_utf8(bytes).expect("serde_json emits UTF-8");
    py.import("json")?.call_method1("loads", (text,))
}

#[pyclass(name = "Network", module = "pynartmle", frozen)]
struct PyNetwork {
    inner: Network,
}

impl PyNetwork {
    fn wrap(graph: nartmle::Result<AdjacencyGraph>) -> PyResult<Self> {
        Ok(PyNetwork {
            inner: Network::new(graph.map_err(py_err)?),
        })
    }
}

#[pymethods]
impl PyNetwork {
    /// Stochastic block model; defaults match the study config.
    #[staticmethod]
    #[pyo3(signature = (n, n_blocks=None, p_in=0.3, p_out=None, seed=0))]
    fn block(
        n: usize,
        n_blocks: Option<usize>,
        p_in: f64,
        p_out: Option<f64>,
        seed: u64,
    ) -> PyResult<Self> {
        let k = n_blocks.unwrap_or((n / 20).max(1));
        let p_out = p_out.unwrap_or(0.3 / n.max(1) as f64);
        Self::wrap(gen_block(
            n,
            k,
            p_in,
            p_out,
            &mut SeedNode::root(seed).rng(),
        ))
    }

    #[staticmethod]
    #[pyo3(signature = (n, m=2, seed=0))]
    fn powerlaw(n: usize, m: usize, seed: u64) -> PyResult<Self> {
        Self::wrap(gen_powerlaw(n, m, &mut SeedNode::root(seed).rng()))
    }

    #[staticmethod]
    fn ring(n: usize) -> PyResult<Self> {
        Self::wrap(ring(n))
    }

    /// Undirected graph from zero-based `(i, j)` pairs.
    #[staticmethod]
    fn from_edges(n: usize, edges: Vec<(usize, usize)>) -> PyResult<Self> {
        Self::wrap(AdjacencyGraph::from_edges(n, &edges))
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn n_edges(&self) -> usize {
        self.inner.graph().n_edges()
    }

    fn degrees(&self) -> Vec<usize> {
        self.inner.graph().degrees()
    }

    fn edges(&self) -> Vec<(usize, usize)> {
        self.inner.graph().edges()
    }

    /// `(I - rho W^T)^{-1} 1`.
    fn omega(&self, py: Python<'_>, rho: f64) -> PyResult<Vec<f64>> {
        py.detach(|| self.inner.w.omega(rho)).map_err(py_err)
    }

    /// Solves `(I - rho W) y = r`.
    fn solve_sar(&self, py: Python<'_>, rho: f64, r: Vec<f64>) -> PyResult<Vec<f64>> {
        py.detach(|| self.inner.w.solve_sar(rho, &r))
            .map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network(n_nodes={}, n_edges={})",
            self.n_nodes(),
            self.n_edges()
        )
    }
}

#[pyclass(name = "ExperimentConfig", module = "pynartmle")]
struct PyExperimentConfig {
    inner: ExperimentConfig,
}

#[pymethods]
impl PyExperimentConfig {
    /// Parses TOML text (unknown keys are rejected); defaults when omitted.
    #[new]
    #[pyo3(signature = (toml=None))]
    fn new(toml: Option<&str>) -> PyResult<Self> {
        let inner = match toml {
            Some(text) => ExperimentConfig::from_toml_str(text).map_err(py_err)?,
            None => ExperimentConfig::default(),
        };
        Ok(PyExperimentConfig { inner })
    }

    #[staticmethod]
    fn from_file(path: PathBuf) -> PyResult<Self> {
        Ok(PyExperimentConfig {
            inner: ExperimentConfig::from_file(&path).map_err(py_err)?,
        })
    }

    fn to_toml(&self) -> PyResult<String> {
        self.inner.to_toml_string().map_err(py_err)
    }

    fn validate(&self) -> PyResult<()> {
        self.inner.validate().map_err(py_err)
    }

    #[getter]
    fn seed(&self) -> u64 {
        self.inner.seed
    }

    #[setter]
    fn set_seed(&mut self, seed: u64) {
        self.inner.seed = seed;
    }

    #[getter]
    fn replications(&self) -> usize {
        self.inner.replications
    }

    #[setter]
    fn set_replications(&mut self, r: usize) {
        self.inner.replications = r;
    }

    #[getter]
    fn workers(&self) -> usize {
        self.inner.workers
    }

    #[setter]
    fn set_workers(&mut self, w: usize) {
        self.inner.workers = w;
    }

    #[getter]
    fn n_nodes(&self) -> usize {
        self.inner.sim.n_nodes
    }

    #[setter]
    fn set_n_nodes(&mut self, n: usize) {
        self.inner.sim.n_nodes = n;
    }

    #[getter]
    fn rho0(&self) -> f64 {
        self.inner.sim.rho0
    }

    #[setter]
    fn set_rho0(&mut self, rho: f64) {
        self.inner.sim.rho0 = rho;
    }

    #[getter]
    fn methods(&self) -> Vec<String> {
        self.inner.methods.iter().map(|m| m.to_string()).collect()
    }

    fn __repr__(&self) -> String {
        format!(
            "ExperimentConfig(seed={}, replications={}, n_nodes={}, rho0={})",
            self.inner.seed, self.inner.replications, self.inner.sim.n_nodes, self.inner.sim.rho0
        )
    }
}

/// Runs a Monte Carlo study; returns the `report.json` contents plus a
/// `timing` entry.
#[pyfunction]
fn simulate<'py>(py: Python<'py>, config: &PyExperimentConfig) -> PyResult<Bound<'py, PyAny>> {
    let config = config.inner.clone();
    config.validate().map_err(py_err)?;
    let (outcome, timing) = py.detach(|| run_study(&config)).map_err(py_err)?;
    let report = to_py(py, &StudyReport::new(&config, &outcome))?;
    report.set_item("timing", to_py(py, &timing)?)?;
    Ok(report)
}

/// Fits the configured methods to CSV data; `config` is estimate TOML text.
#[pyfunction]
#[pyo3(signature = (data, edges, config=""))]
fn estimate<'py>(
    py: Python<'py>,
    data: PathBuf,
    edges: PathBuf,
    config: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let config = EstimateConfig::from_toml_str(config).map_err(py_err)?;
    let (report, times) = py
        .detach(|| run_estimate(&data, &edges, &config))
        .map_err(py_err)?;
    let out = to_py(py, &report)?;
    out.set_item("timing", to_py(py, &times)?)?;
    Ok(out)
}

/// Monte Carlo truth of a study config.
#[pyfunction]
fn oracle<'py>(py: Python<'py>, config: &PyExperimentConfig) -> PyResult<Bound<'py, PyDict>> {
    let config = config.inner.clone();
    config.validate().map_err(py_err)?;
    let env = py
        .detach(|| Environment::reference(&config))
        .map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("psi", env.oracle.psi)?;
    out.set_item("mc_se", env.oracle.mc_se)?;
    out.set_item("n_mc", env.oracle.n_mc)?;
    out.set_item("n_nodes", env.network.n())?;
    out.set_item("n_edges", env.network.graph().n_edges())?;
    Ok(out)
}

/// `[(name, passed, detail)]` for the built-in invariant checks.
#[pyfunction]
fn selftest(py: Python<'_>) -> Vec<(String, bool, String)> {
    py.detach(run_selftest)
        .into_iter()
        .map(|c| (c.name.to_string(), c.passed, c.detail))
        .collect()
}

#[pymodule]
fn pynartmle(m: &Bound<'_, PyModule>) -> PyResult<()> {
    let py = m.py();
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyExperimentConfig>()?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(estimate, m)?)?;
    m.add_function(wrap_pyfunction!(oracle, m)?)?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    m.add("NartmleError", py.get_type::<NartmleError>())?;
    m.add("ConfigError", py.get_type::<ConfigError>())?;
    m.add("DataError", py.get_type::<DataError>())?;
    m.add("NumericalError", py.get_type::<NumericalError>())?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

//! Python bindings. Structured results cross the boundary as plain dicts
//! and lists.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use collusion_cli::{CliError, ExperimentConfig};
use collusion_core::engine::SimConfig;
use collusion_core::games::{self, GameSpec};
use collusion_core::metrics;
use collusion_core::stability::{self, StabilityConfig};

fn value_err<E: std::fmt::Display>(e: E) -> PyErr {
    PyValueError::new_err(e.to_string())
}

fn cli_err(e: CliError) -> PyErr {
    match e {
        CliError::Config(_) | CliError::Budget(_) => value_err(e),
        _ => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py, T: serde::Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(value_err)?;
    py.import("json")?.call_method1("loads", (text,))
}

fn from_py<'py>(py: Python<'py>, obj: &Bound<'py, PyAny>) -> PyResult<String> {
    if let Ok(s) = obj.extract::<String>() {
        return Ok(s);
    }
    py.import("json")?.call_method1("dumps", (obj,))?.extract()
}

/// A symmetric two-player game on a finite action grid.
#[pyclass(name = "Game", module = "collusion", frozen, skip_from_py_object)]
#[derive(Clone)]
pub struct PyGame {
    inner: GameSpec,
}

#[pymethods]
impl PyGame {
    #[staticmethod]
    #[pyo3(signature = (k=10, min_price=0.1, wtp=1.0, cost=0.0))]
    fn bertrand(k: usize, min_price: f64, wtp: f64, cost: f64) -> PyResult<Self> {
        Ok(Self { inner: games::make_bertrand(k, min_price, wtp, cost).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (u_cd=0.0, u_dd=1.0, u_cc=2.0, u_dc=3.0))]
    fn prisoners_dilemma(u_cd: f64, u_dd: f64, u_cc: f64, u_dc: f64) -> PyResult<Self> {
        Ok(Self { inner: games::make_prisoners_dilemma(u_cd, u_dd, u_cc, u_dc).map_err(value_err)? })
    }

    #[staticmethod]
    #[pyo3(signature = (k=10, v=1.0, omega=0.0))]
    fn mixed_auction(k: usize, v: f64, omega: f64) -> PyResult<Self> {
        Ok(Self { inner: games::make_mixed_auction(k, v, omega).map_err(value_err)? })
    }

    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self { inner: GameSpec::from_json(text).map_err(value_err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn k(&self) -> usize {
        self.inner.k()
    }

    #[getter]
    fn label(&self) -> String {
        self.inner.label().to_string()
    }

    #[getter]
    fn grid(&self) -> Vec<f64> {
        self.inner.grid().values().to_vec()
    }

    fn payoff(&self, own: usize, opp: usize) -> PyResult<f64> {
        let k = self.inner.k();
        if own >= k || opp >= k {
            return Err(value_err(format!("actions must be below {k}")));
        }
        Ok(self.inner.payoff(own, opp))
    }

    fn nash_action(&self) -> usize {
        self.inner.nash_action()
    }

    /// Codes of the failed assumptions; empty when all hold.
    fn check_assumptions(&self) -> Vec<String> {
        games::check_assumptions(&self.inner).violations.iter().map(|v| v.assumption.code().to_string()).collect()
    }

    /// `(Nash total profit, collusive total profit)`
    fn benchmark_profits(&self) -> (f64, f64) {
        games::benchmark_profits(&self.inner)
    }

    fn collusion_index(&self, mean_price: f64) -> PyResult<f64> {
        metrics::collusion_index(mean_price, &self.inner).map_err(value_err)
    }

    fn __repr__(&self) -> String {
        format!("Game(label={}, k={})", self.inner.label(), self.inner.k())
    }
}

/// Resolved config of a figure preset as a dict.
#[pyfunction]
#[pyo3(signature = (figure, scaled=true))]
fn preset<'py>(py: Python<'py>, figure: &str, scaled: bool) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &collusion_cli::preset(figure, scaled).map_err(cli_err)?)
}

/// Runs one batch from a config (dict or JSON text). Returns
/// `{"aggregate": …, "sessions": […]}`.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn simulate<'py>(py: Python<'py>, config: &Bound<'py, PyAny>, threads: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(&from_py(py, config)?).map_err(cli_err)?;
    let threads = collusion_cli::resolve_threads(threads, cfg.threads);
    let outcome = py.detach(|| collusion_cli::simulate(&cfg, threads)).map_err(cli_err)?;
    let doc = serde_json::json!({ "aggregate": outcome.report, "sessions": outcome.results });
    to_py(py, &doc)
}

/// One aggregate row per sweep cell.
#[pyfunction]
#[pyo3(signature = (config, threads=None))]
fn sweep<'py>(py: Python<'py>, config: &Bound<'py, PyAny>, threads: Option<usize>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = ExperimentConfig::from_json(&from_py(py, config)?).map_err(cli_err)?;
    let threads = collusion_cli::resolve_threads(threads, cfg.threads);
    let rows = py.detach(|| collusion_cli::sweep(&cfg, threads)).map_err(cli_err)?;
    to_py(py, &rows)
}

/// Validates a simulation config; raises `ValueError` when it is rejected.
#[pyfunction]
fn validate_config(py: Python<'_>, config: &Bound<'_, PyAny>) -> PyResult<()> {
    let sim: SimConfig = serde_json::from_str(&from_py(py, config)?).map_err(value_err)?;
    sim.validate().map_err(value_err)
}

/// Names of the shipped stability instances.
#[pyfunction]
fn stability_instances() -> Vec<String> {
    stability::shipped_instances().into_iter().filter_map(|c| c.name).collect()
}

/// Verifies a shipped instance (by name) or a config dict/JSON text.
#[pyfunction]
fn verify_stability<'py>(py: Python<'py>, instance: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let cfg = match instance.extract::<String>() {
        Ok(name) if !name.trim_start().starts_with('{') => stability::shipped_instances()
            .into_iter()
            .find(|c| c.name.as_deref() == Some(name.as_str()))
            .ok_or_else(|| value_err(format!("unknown stability instance `{name}`")))?,
        _ => serde_json::from_str::<StabilityConfig>(&from_py(py, instance)?).map_err(value_err)?,
    };
    let report = py.detach(|| stability::verify(&cfg)).map_err(value_err)?;
    to_py(py, &report)
}

/// `(lower_exclusive, upper_inclusive, grid_indices)` for a symmetric bid at grid index `b`.
#[pyfunction]
fn valid_perturbations_auction(k: usize, v: f64, omega: f64, b: usize) -> PyResult<(f64, f64, Vec<usize>)> {
    let p = stability::valid_perturbations_auction(k, v, omega, b).map_err(value_err)?;
    Ok((p.lower_exclusive, p.upper_inclusive, p.grid_indices))
}

#[pyfunction]
fn nu(k: usize, beta: f64) -> PyResult<f64> {
    collusion_cli::nu(k, beta).map_err(cli_err)
}

#[pyfunction]
fn session_seed(master_seed: u64, session: usize) -> u64 {
    collusion_core::engine::session_seed(master_seed, session)
}

#[pymodule]
fn collusion(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGame>()?;
    m.add_function(wrap_pyfunction!(preset, m)?)?;
    m.add_function(wrap_pyfunction!(simulate, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(validate_config, m)?)?;
    m.add_function(wrap_pyfunction!(stability_instances, m)?)?;
    m.add_function(wrap_pyfunction!(verify_stability, m)?)?;
    m.add_function(wrap_pyfunction!(valid_perturbations_auction, m)?)?;
    m.add_function(wrap_pyfunction!(nu, m)?)?;
    m.add_function(wrap_pyfunction!(session_seed, m)?)?;
    m.add("PRESETS", collusion_cli::PRESET_IDS.to_vec())?;
    Ok(())
}

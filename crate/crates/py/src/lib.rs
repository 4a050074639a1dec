//! Python bindings. Instances are wrapped as a class; results cross the
//! boundary as plain dicts and lists.

use jsprr::adaptation::{run_periods, DemandSequence, PeriodOptions};
use jsprr::analysis::{counterexample_report, delta_bound as delta_bound_impl, Bottleneck};
use jsprr::baselines::{greedy_cache, nonoverlapping_optimal, optimal_bruteforce};
use jsprr::generator::{generate_instance, GeneratorConfig};
use jsprr::model::{evaluate_solution, Instance, IntegerSolution};
use jsprr::relaxation::{build_lp, solve_lp as solve_lp_impl};
use jsprr::rounding::{bicriteria_factors, pick_trial, run_trials, Pick};
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde::Serialize;

fn err(e: jsprr::Error) -> PyErr {
    if e.exit_code() == 2 {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py<'py, T: Serialize>(py: Python<'py>, v: &T) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

#[pyclass(name = "Instance", module = "pyjsprr", skip_from_py_object)]
#[derive(Clone)]
struct PyInstance {
    inner: Instance,
}

#[pymethods]
impl PyInstance {
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(PyInstance { inner: Instance::from_json(text).map_err(err)? })
    }

    fn to_json(&self) -> String {
        self.inner.to_json()
    }

    #[getter]
    fn n_stations(&self) -> usize {
        self.inner.n_stations()
    }

    #[getter]
    fn n_services(&self) -> usize {
        self.inner.n_services()
    }

    #[getter]
    fn n_users(&self) -> usize {
        self.inner.n_users()
    }

    /// Messages for every structural problem; empty when valid.
    fn validate(&self) -> Vec<String> {
        self.inner.validate().violations
    }

    fn __repr__(&self) -> String {
        format!(
            "Instance(stations={}, services={}, users={})",
            self.inner.n_stations(),
            self.inner.n_services(),
            self.inner.n_users()
        )
    }
}

/// Synthetic instance. Keyword overrides apply on top of the defaults.
#[pyfunction]
#[pyo3(signature = (seed=0, n_users=None, n_services=None, storage_cap=None, compute_cap=None, uplink_cap=None, downlink_cap=None))]
fn generate(
    seed: u64,
    n_users: Option<usize>,
    n_services: Option<usize>,
    storage_cap: Option<f64>,
    compute_cap: Option<f64>,
    uplink_cap: Option<f64>,
    downlink_cap: Option<f64>,
) -> PyResult<PyInstance> {
    let d = GeneratorConfig::default();
    let cfg = GeneratorConfig {
        seed,
        n_users: n_users.unwrap_or(d.n_users),
        n_services: n_services.unwrap_or(d.n_services),
        storage_cap: storage_cap.unwrap_or(d.storage_cap),
        compute_cap: compute_cap.unwrap_or(d.compute_cap),
        uplink_cap: uplink_cap.unwrap_or(d.uplink_cap),
        downlink_cap: downlink_cap.unwrap_or(d.downlink_cap),
        ..d
    };
    Ok(PyInstance { inner: generate_instance(&cfg).map_err(err)? })
}

/// Fractional optimum: objective, placement fractions and routing fractions.
#[pyfunction]
fn solve_lp<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    let lp = build_lp(&instance.inner, instance.inner.has_adaptation()).map_err(err)?;
    let frac = py.detach(|| solve_lp_impl(&lp)).map_err(err)?;
    to_py(py, &frac)
}

#[derive(Serialize)]
struct Solved<'a> {
    lp_objective: f64,
    trial: usize,
    cloud_load: usize,
    raw_cloud_load: usize,
    solution: &'a IntegerSolution,
    raw: &'a IntegerSolution,
    factors: jsprr::rounding::BicriteriaReport,
}

/// Relaxation followed by `trials` rounding trials; returns the picked trial.
#[pyfunction]
#[pyo3(signature = (instance, seed=0, trials=20, pick="best"))]
fn solve<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    seed: u64,
    trials: usize,
    pick: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let pick = match pick {
        "best" => Pick::Best,
        "median" => Pick::Median,
        other => return Err(PyValueError::new_err(format!("unknown pick '{other}'"))),
    };
    if trials == 0 {
        return Err(PyValueError::new_err("trials must be at least 1"));
    }
    let inst = &instance.inner;
    let (frac, runs) = py
        .detach(|| {
            let frac = solve_lp_impl(&build_lp(inst, inst.has_adaptation())?)?;
            let runs = run_trials(inst, &frac, seed, trials)?;
            Ok((frac, runs))
        })
        .map_err(err)?;
    let t = &runs[pick_trial(&runs, pick).expect("at least one trial")];
    to_py(
        py,
        &Solved {
            lp_objective: frac.objective,
            trial: t.trial,
            cloud_load: t.repaired_report.cloud_load,
            raw_cloud_load: t.raw_report.cloud_load,
            solution: &t.repaired,
            raw: &t.raw,
            factors: bicriteria_factors(inst, &frac),
        },
    )
}

/// Greedy caching baseline: `raw` and `repaired` solutions.
#[pyfunction]
fn greedy<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &greedy_cache(&instance.inner).map_err(err)?)
}

/// Exact optimum by enumeration (tiny instances only).
#[pyfunction]
fn optimal<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &optimal_bruteforce(&instance.inner).map_err(err)?)
}

/// Optimal cloud load when every user is covered by at most one station.
#[pyfunction]
fn nonoverlapping(instance: &PyInstance) -> PyResult<usize> {
    nonoverlapping_optimal(&instance.inner).map_err(err)
}

/// Load report of a solution given as a dict (as returned by `solve`).
#[pyfunction]
fn evaluate<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    solution: &Bound<'py, PyAny>,
) -> PyResult<Bound<'py, PyAny>> {
    let text: String = py.import("json")?.call_method1("dumps", (solution,))?.extract()?;
    let sol: IntegerSolution =
        serde_json::from_str(&text).map_err(|e| PyValueError::new_err(e.to_string()))?;
    to_py(py, &evaluate_solution(&instance.inner, &sol).map_err(err)?)
}

#[pyfunction]
fn delta_bound<'py>(py: Python<'py>, instance: &PyInstance) -> PyResult<Bound<'py, PyAny>> {
    to_py(py, &delta_bound_impl(&instance.inner).map_err(err)?)
}

#[pyfunction]
#[pyo3(signature = (bottleneck="compute", capacity=1.0))]
fn counterexample<'py>(py: Python<'py>, bottleneck: &str, capacity: f64) -> PyResult<Bound<'py, PyAny>> {
    let b = match bottleneck {
        "compute" => Bottleneck::Compute,
        "uplink" => Bottleneck::Uplink,
        "downlink" => Bottleneck::Downlink,
        other => return Err(PyValueError::new_err(format!("unknown bottleneck '{other}'"))),
    };
    to_py(py, &counterexample_report(b, capacity).map_err(err)?)
}

/// Multi-period run with Zipf churn and a per-period adaptation budget.
#[pyfunction]
#[pyo3(signature = (instance, periods, churn=0.2, budget=f64::INFINITY, seed=0, trials=20, zipf_shape=0.8))]
#[allow(clippy::too_many_arguments)]
fn periods<'py>(
    py: Python<'py>,
    instance: &PyInstance,
    periods: usize,
    churn: f64,
    budget: f64,
    seed: u64,
    trials: usize,
    zipf_shape: f64,
) -> PyResult<Bound<'py, PyAny>> {
    let inst = &instance.inner;
    let res = py
        .detach(|| {
            let demands = DemandSequence::with_churn(inst, periods, churn, zipf_shape, seed)?;
            let opts = PeriodOptions { trials, ..Default::default() };
            run_periods(inst, &demands, budget, seed, &opts)
        })
        .map_err(err)?;
    to_py(py, &res)
}

#[pymodule]
fn pyjsprr(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyInstance>()?;
    m.add_function(wrap_pyfunction!(generate, m)?)?;
    m.add_function(wrap_pyfunction!(solve_lp, m)?)?;
    m.add_function(wrap_pyfunction!(solve, m)?)?;
    m.add_function(wrap_pyfunction!(greedy, m)?)?;
    m.add_function(wrap_pyfunction!(optimal, m)?)?;
    m.add_function(wrap_pyfunction!(nonoverlapping, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate, m)?)?;
    m.add_function(wrap_pyfunction!(delta_bound, m)?)?;
    m.add_function(wrap_pyfunction!(counterexample, m)?)?;
    m.add_function(wrap_pyfunction!(periods, m)?)?;
    Ok(())
}

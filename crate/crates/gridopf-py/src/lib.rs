//! Python bindings: the instance model, the two solver phases, the
//! evaluator, and the scoring functions.
//!
//! Structured results (evaluation reports, leaderboards) are returned as
//! JSON strings; load them with `json.loads`.

use std::sync::Arc;
use std::time::Duration;

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

use gridopf::acpf::BaseState;
use gridopf::contingency::{ContingencyConfig, ContingencyState};
use gridopf::evaluator::EvalConfig;
use gridopf::model::Network as CoreNetwork;
use gridopf::opf::SolveConfig;
use num_complex::Complex64;

fn value_err(e: impl std::fmt::Display) -> PyErr {
    PyValueError::new_err(e.to_string())
}

/// Immutable per-unit network.
#[pyclass(frozen, name = "Network")]
struct PyNetwork {
    inner: Arc<CoreNetwork>,
}

#[pymethods]
impl PyNetwork {
    #[getter]
    fn n_buses(&self) -> usize {
        self.inner.buses().len()
    }
    #[getter]
    fn n_generators(&self) -> usize {
        self.inner.generators().len()
    }
    #[getter]
    fn n_lines(&self) -> usize {
        self.inner.lines().len()
    }
    #[getter]
    fn ref_bus(&self) -> usize {
        self.inner.ref_bus()
    }

    fn contingency_ids(&self) -> Vec<String> {
        self.inner
            .contingencies()
            .iter()
            .map(|k| k.id.clone())
            .collect()
    }

    /// Invariant violations; empty means well-formed.
    fn validate(&self) -> Vec<String> {
        self.inner.validate()
    }

    /// Serialize back to the instance document on the given MVA base.
    fn to_instance_text(&self, base_mva: f64) -> String {
        gridopf::io::write_instance(&self.inner, base_mva)
    }

    /// Full objective of the projected do-nothing point.
    fn worst_case_score(&self) -> f64 {
        gridopf::evaluator::worst_case_score(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!(
            "Network({} buses, {} generators, {} lines, {} contingencies)",
            self.inner.buses().len(),
            self.inner.generators().len(),
            self.inner.lines().len(),
            self.inner.contingencies().len()
        )
    }
}

/// Base-case decision variables.
#[pyclass(frozen, name = "BaseStateHandle")]
struct PyBaseState {
    inner: BaseState,
}

#[pymethods]
impl PyBaseState {
    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.v.clone()
    }
    #[getter]
    fn theta(&self) -> Vec<f64> {
        self.inner.theta.clone()
    }
    #[getter]
    fn b(&self) -> Vec<f64> {
        self.inner.b.clone()
    }
    #[getter]
    fn p_g(&self) -> Vec<f64> {
        self.inner.p_g.clone()
    }
    #[getter]
    fn q_g(&self) -> Vec<f64> {
        self.inner.q_g.clone()
    }

    /// Render as a base solution file.
    fn to_solution_text(&self, net: &PyNetwork) -> PyResult<String> {
        gridopf::io::write_base_solution(&net.inner, &self.inner).map_err(value_err)
    }
}

/// One solved post-contingency state.
#[pyclass(frozen, name = "ContingencyStateHandle")]
struct PyContingencyState {
    inner: ContingencyState,
}

#[pymethods]
impl PyContingencyState {
    #[getter]
    fn delta(&self) -> f64 {
        self.inner.delta
    }
    #[getter]
    fn degraded(&self) -> bool {
        self.inner.degraded
    }
    #[getter]
    fn p_g(&self) -> Vec<f64> {
        self.inner.point.p_g.clone()
    }
    #[getter]
    fn v(&self) -> Vec<f64> {
        self.inner.point.v.clone()
    }
    /// Largest bus power-balance residual magnitude.
    #[getter]
    fn max_slack(&self) -> f64 {
        self.inner
            .slack_p
            .iter()
            .chain(&self.inner.slack_q)
            .fold(0.0f64, |m, s| m.max(s.abs()))
    }
}

/// Parse an instance document (JSON text with physical units).
#[pyfunction]
fn parse_instance(text: &str) -> PyResult<PyNetwork> {
    let net = gridopf::io::parse_instance(text).map_err(value_err)?;
    Ok(PyNetwork {
        inner: Arc::new(net),
    })
}

/// Read and parse an instance file.
#[pyfunction]
fn load_instance(path: &str) -> PyResult<PyNetwork> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| PyRuntimeError::new_err(format!("{path}: {e}")))?;
    parse_instance(&text)
}

/// A small built-in example network by name:
/// "two_bus", "three_gen_ring", "five_bus", or "reserve_scarce".
#[pyfunction]
fn sample_network(name: &str) -> PyResult<PyNetwork> {
    let net = match name {
        "two_bus" => gridopf::samples::two_bus(),
        "three_gen_ring" => gridopf::samples::three_gen_ring(),
        "five_bus" => gridopf::samples::five_bus(),
        "reserve_scarce" => gridopf::samples::reserve_scarce(),
        other => return Err(value_err(format!("unknown sample {other:?}"))),
    };
    Ok(PyNetwork {
        inner: Arc::new(net),
    })
}

fn cfg_with_budget(time_budget_secs: f64) -> SolveConfig {
    SolveConfig {
        time_budget: Duration::from_secs_f64(time_budget_secs),
        ..SolveConfig::offline()
    }
}

/// Unhedged base-case solve.
#[pyfunction]
#[pyo3(signature = (net, time_budget_secs = 60.0))]
fn solve_base(py: Python<'_>, net: &PyNetwork, time_budget_secs: f64) -> PyBaseState {
    let inner = Arc::clone(&net.inner);
    let cfg = cfg_with_budget(time_budget_secs);
    let state = py.detach(move || gridopf::opf::solve_base(&inner, &cfg));
    PyBaseState { inner: state }
}

/// Security-constrained solve (screening plus iterative hedging).
#[pyfunction]
#[pyo3(signature = (net, time_budget_secs = 60.0))]
fn solve_sc(py: Python<'_>, net: &PyNetwork, time_budget_secs: f64) -> PyBaseState {
    let inner = Arc::clone(&net.inner);
    let cfg = cfg_with_budget(time_budget_secs);
    let outcome = py.detach(move || gridopf::opf::solve_sc(&inner, &cfg));
    PyBaseState {
        inner: outcome.base,
    }
}

/// Solve one contingency from a base state.
#[pyfunction]
fn solve_contingency(
    py: Python<'_>,
    net: &PyNetwork,
    base: &PyBaseState,
    contingency_id: &str,
) -> PyResult<PyContingencyState> {
    let k = net.inner.contingency(contingency_id).map_err(value_err)?.clone();
    let inner = Arc::clone(&net.inner);
    let base = base.inner.clone();
    let state = py.detach(move || {
        gridopf::contingency::solve_contingency(&inner, &base, &k, &ContingencyConfig::default())
    });
    Ok(PyContingencyState {
        inner: state.map_err(value_err)?,
    })
}

/// Contingency solution file for every contingency, from a base state.
#[pyfunction]
fn solve_all_contingencies(
    py: Python<'_>,
    net: &PyNetwork,
    base: &PyBaseState,
) -> PyResult<String> {
    let inner = Arc::clone(&net.inner);
    let base = base.inner.clone();
    py.detach(move || {
        let blocks: Vec<gridopf::io::ContingencyBlock> = inner
            .contingencies()
            .iter()
            .map(|k| {
                let s = gridopf::contingency::solve_contingency(
                    &inner,
                    &base,
                    k,
                    &ContingencyConfig::default(),
                )
                .expect("contingency ids come from the network");
                gridopf::io::ContingencyBlock {
                    label: k.id.clone(),
                    delta: s.delta,
                    point: s.point,
                }
            })
            .collect();
        gridopf::io::write_contingency_solutions(&inner, &blocks).map_err(value_err)
    })
}

/// Evaluate solution file texts against the instance; returns the
/// evaluation report as a JSON string.
#[pyfunction]
fn evaluate_solution(net: &PyNetwork, solution1: &str, solution2: &str) -> PyResult<String> {
    let base = gridopf::io::read_base_solution(&net.inner, solution1).map_err(value_err)?;
    let blocks =
        gridopf::io::scan_contingency_solutions(&net.inner, solution2).map_err(value_err)?;
    let report = gridopf::evaluator::evaluate_full(&net.inner, &base, &blocks, &EvalConfig::default())
        .map_err(value_err)?;
    serde_json::to_string(&report).map_err(|e| PyRuntimeError::new_err(e.to_string()))
}

/// Scoring rule: the evaluated total, or the worst-case score
/// for infeasible/unreadable/overpriced submissions.
#[pyfunction]
#[pyo3(signature = (net, report_json = None))]
fn score_or_worst_case(net: &PyNetwork, report_json: Option<&str>) -> PyResult<f64> {
    let report = report_json
        .map(serde_json::from_str::<gridopf::evaluator::EvaluationReport>)
        .transpose()
        .map_err(value_err)?;
    Ok(gridopf::evaluator::score_or_worst_case(
        &net.inner,
        report.as_ref(),
    ))
}

/// Element admittance Y = G + iB: kind is "resistor", "inductor", or
/// "capacitor".
#[pyfunction]
fn admittance(kind: &str, value: f64, omega: f64) -> PyResult<Complex64> {
    let element = match kind {
        "resistor" => gridopf::phasor::ElementKind::Resistor(value),
        "inductor" => gridopf::phasor::ElementKind::Inductor(value),
        "capacitor" => gridopf::phasor::ElementKind::Capacitor(value),
        other => return Err(value_err(format!("unknown element kind {other:?}"))),
    };
    gridopf::phasor::admittance(element, omega).map_err(value_err)
}

/// Complex power s = v·i*.
#[pyfunction]
fn complex_power(v: Complex64, i: Complex64) -> Complex64 {
    gridopf::phasor::complex_power(v, i)
}

/// Geometric-mean overall score: per-network scenario scores in, one
/// overall score out.
#[pyfunction]
fn geometric_mean_overall(scores: Vec<Vec<f64>>) -> PyResult<f64> {
    gridopf::scoring::geometric_mean_overall(&scores).map_err(value_err)
}

/// Area under each team's performance profile on [1, tau_max].
#[pyfunction]
#[pyo3(signature = (scores, tau_max = 10.0))]
fn performance_profile_area(scores: Vec<Vec<f64>>, tau_max: f64) -> PyResult<Vec<f64>> {
    gridopf::scoring::performance_profile_area(&scores, tau_max).map_err(value_err)
}

/// Difficulty gap ε = o2/o1 − 1.
#[pyfunction]
fn gap(o1: f64, o2: f64) -> PyResult<f64> {
    gridopf::scoring::gap(o1, o2).map_err(value_err)
}

/// Hardness index H = c_rel · p_rel · log10(p_ub_rel).
#[pyfunction]
fn hardness_index(c_rel: f64, p_rel: f64, p_ub_rel: f64) -> PyResult<f64> {
    gridopf::scoring::hardness_index(c_rel, p_rel, p_ub_rel).map_err(value_err)
}

#[pymodule]
fn gridopf_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyNetwork>()?;
    m.add_class::<PyBaseState>()?;
    m.add_class::<PyContingencyState>()?;
    m.add_function(wrap_pyfunction!(parse_instance, m)?)?;
    m.add_function(wrap_pyfunction!(load_instance, m)?)?;
    m.add_function(wrap_pyfunction!(sample_network, m)?)?;
    m.add_function(wrap_pyfunction!(solve_base, m)?)?;
    m.add_function(wrap_pyfunction!(solve_sc, m)?)?;
    m.add_function(wrap_pyfunction!(solve_contingency, m)?)?;
    m.add_function(wrap_pyfunction!(solve_all_contingencies, m)?)?;
    m.add_function(wrap_pyfunction!(evaluate_solution, m)?)?;
    m.add_function(wrap_pyfunction!(score_or_worst_case, m)?)?;
    m.add_function(wrap_pyfunction!(admittance, m)?)?;
    m.add_function(wrap_pyfunction!(complex_power, m)?)?;
    m.add_function(wrap_pyfunction!(geometric_mean_overall, m)?)?;
    m.add_function(wrap_pyfunction!(performance_profile_area, m)?)?;
    m.add_function(wrap_pyfunction!(gap, m)?)?;
    m.add_function(wrap_pyfunction!(hardness_index, m)?)?;
    Ok(())
}

//! Python bindings for the `fracchemo` simulator.

use std::fs;

use pyo3::exceptions::{PyOSError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use fracchemo::config::{parse_config_with, ParseOptions};
use fracchemo::output::{csv_header, csv_line};
use fracchemo::spectral::{Grid as CoreGrid, Transform};
use fracchemo::verification::{criticality_sweep, estimate_sobolev_constant, linear_oracle, scaling_symmetry_check, verify_scenario};
use fracchemo::{simulate, DiagnosticsRow, Error, Outcome};

fn py_err(e: Error) -> PyErr {
    match e {
        Error::Io(e) => PyOSError::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

/// Periodic grid with `n` points per axis on `[0, 2 pi)^d`.
#[pyclass(name = "Grid", frozen, from_py_object)]
#[derive(Clone, Copy)]
struct PyGrid(CoreGrid);

#[pymethods]
impl PyGrid {
    #[new]
    fn new(dim: usize, n: usize) -> PyResult<Self> {
        CoreGrid::new(dim, n).map(PyGrid).map_err(py_err)
    }

    #[getter]
    fn dim(&self) -> usize {
        self.0.dim()
    }

    #[getter]
    fn n(&self) -> usize {
        self.0.n()
    }

    /// Node coordinates along one axis.
    fn nodes(&self) -> Vec<f64> {
        (0..self.0.n()).map(|j| self.0.node(j)).collect()
    }

    fn __repr__(&self) -> String {
        format!("Grid(dim={}, n={})", self.0.dim(), self.0.n())
    }
}

/// `(name, value, tolerance, passed)`.
type CheckTuple = (String, f64, f64, bool);

/// A parsed scenario file.
#[pyclass(name = "Scenario", frozen)]
struct PyScenario(fracchemo::Scenario);

#[pymethods]
impl PyScenario {
    #[staticmethod]
    #[pyo3(signature = (text, strict = false))]
    fn parse(text: &str, strict: bool) -> PyResult<Self> {
        parse_config_with(text, ParseOptions { strict })
            .map(PyScenario)
            .map_err(|e| py_err(e.into()))
    }

    #[staticmethod]
    #[pyo3(signature = (path, strict = false))]
    fn load(path: &str, strict: bool) -> PyResult<Self> {
        let text = fs::read_to_string(path).map_err(|e| PyOSError::new_err(format!("{path}: {e}")))?;
        Self::parse(&text, strict)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.0.name
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.0.params.alpha
    }

    #[getter]
    fn grid(&self) -> PyGrid {
        PyGrid(self.0.grid())
    }

    /// Normalized config text; parses back to the same scenario.
    fn to_config(&self) -> String {
        self.0.to_config()
    }

    fn simulate(&self, py: Python<'_>) -> PyResult<PyTrajectory> {
        py.detach(|| simulate(&self.0)).map(PyTrajectory).map_err(py_err)
    }

    /// Runs the scenario and returns `(passed, checks)`.
    fn verify(&self, py: Python<'_>) -> PyResult<(bool, Vec<CheckTuple>)> {
        let rep = py.detach(|| verify_scenario(&self.0)).map_err(py_err)?;
        let mut checks: Vec<_> = rep
            .checks
            .iter()
            .map(|c| (c.name.clone(), c.value, c.tolerance, c.passed))
            .collect();
        checks.extend(rep.monitors.iter().map(|m| {
            (format!("monitor_{}", m.monitor.name()), m.relative_increment, m.tolerance, m.passed)
        }));
        Ok((rep.passed(), checks))
    }

    /// Relative discrepancy between the run and its rescaled counterpart.
    #[pyo3(signature = (lam = None))]
    fn scaling_check(&self, py: Python<'_>, lam: Option<usize>) -> PyResult<f64> {
        let lam = lam.unwrap_or(self.0.scaling_lambda);
        py.detach(|| scaling_symmetry_check(&self.0, lam)).map_err(py_err)
    }

    /// Sweep table as CSV text.
    #[pyo3(signature = (workers = 1))]
    fn sweep(&self, py: Python<'_>, workers: usize) -> PyResult<String> {
        let sc = &self.0;
        py.detach(|| criticality_sweep(&sc.sweep.alphas, &sc.sweep.amplitudes, sc, workers))
            .map(|t| t.to_csv())
            .map_err(py_err)
    }
}

/// Diagnostics of a finished run.
#[pyclass(name = "Trajectory", frozen)]
struct PyTrajectory(fracchemo::Trajectory);

fn row_dict<'py>(py: Python<'py>, r: &DiagnosticsRow) -> PyResult<Bound<'py, PyDict>> {
    let d = PyDict::new(py);
    let pairs = [
        ("t", r.t),
        ("E0", r.e0),
        ("Ehalf", r.e_half),
        ("E1", r.e1),
        ("E2", r.e2),
        ("D0", r.d0),
        ("D1", r.d1),
        ("D2", r.d2),
        ("mean_u", r.mean_u),
        ("min_u", r.min_u),
        ("max_u", r.max_u),
        ("curl_norm", r.curl_norm),
        ("div_q", r.div_q_norm),
        ("grad_q", r.grad_q_norm),
        ("R_low", r.r_low),
        ("R_1", r.r_1),
    ];
    for (k, v) in pairs {
        d.set_item(k, v)?;
    }
    d.set_item("R_2", r.r_2)?;
    d.set_item("step", r.step)?;
    d.set_item("mean_q", r.mean_q.clone())?;
    d.set_item("flags", r.flags.to_string())?;
    Ok(d)
}

#[pymethods]
impl PyTrajectory {
    fn rows<'py>(&self, py: Python<'py>) -> PyResult<Vec<Bound<'py, PyDict>>> {
        self.0.rows.iter().map(|r| row_dict(py, r)).collect()
    }

    fn __len__(&self) -> usize {
        self.0.rows.len()
    }

    #[getter]
    fn blew_up(&self) -> bool {
        matches!(self.0.outcome, Outcome::BlowUp { .. })
    }

    /// Final time and `u` on the grid nodes (row-major in 2-D).
    fn final_u(&self) -> (f64, Vec<f64>) {
        let s = &self.0.final_state;
        (s.t, s.u.to_samples())
    }

    fn to_csv(&self) -> String {
        let mut out = csv_header();
        out.push('\n');
        for r in &self.0.rows {
            out.push_str(&csv_line(r));
            out.push('\n');
        }
        out
    }
}

/// Estimate of the best constant in `|g|_L4 <= C |g|_H^(1/4)`, returned as
/// `(ratio, threshold, evaluations)`.
#[pyfunction]
#[pyo3(signature = (budget = 10_000, seed = 0))]
fn sobolev_constant(py: Python<'_>, budget: usize, seed: u64) -> PyResult<(f64, f64, usize)> {
    let est = py.detach(|| estimate_sobolev_constant(budget, seed)).map_err(py_err)?;
    Ok((est.ratio, est.threshold, est.evaluations))
}

/// Exact solution of `u_t = -Lambda^alpha u` from nodal samples.
#[pyfunction]
fn fractional_heat(grid: PyGrid, samples: Vec<f64>, alpha: f64, t: f64) -> PyResult<Vec<f64>> {
    let mut tr = Transform::new(grid.0);
    let u0 = tr.forward(&samples).map_err(py_err)?;
    let u = linear_oracle(&u0, alpha, t).map_err(py_err)?;
    tr.inverse(&u).map_err(py_err)
}

#[pymodule]
fn fracchemo_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyGrid>()?;
    m.add_class::<PyScenario>()?;
    m.add_class::<PyTrajectory>()?;
    m.add_function(wrap_pyfunction!(sobolev_constant, m)?)?;
    m.add_function(wrap_pyfunction!(fractional_heat, m)?)?;
    m.add("CSV_HEADER", csv_header())?;
    Ok(())
}

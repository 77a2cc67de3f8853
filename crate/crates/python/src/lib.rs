//! Python bindings.
//!
//! Structured results (summaries, reports, predictions) cross the boundary as
//! the same JSON the `thk` tool prints, decoded with Python's `json` module.

use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::{PyException, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

use ::turing_hopf::model::{load_model, ModelSpec};
use ::turing_hopf::pipeline::{to_json, Analysis, PipelineError};
use ::turing_hopf::simulate::{analyze_pattern, run_from, SimConfig, Trajectory};
use ::turing_hopf::HOLLING_TANNER;

create_exception!(turing_hopf, TuringHopfError, PyException, "Analysis or simulation failure.");

fn err(e: impl Into<PipelineError>) -> PyErr {
    let e = e.into();
    TuringHopfError::new_err((e.code(), e.to_string()))
}

fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = to_json(value).map_err(|e| PyValueError::new_err(e.to_string()))?;
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

/// A reaction-diffusion model with a delay.
#[pyclass(name = "Model", frozen)]
struct PyModel {
    inner: ModelSpec,
}

#[pymethods]
impl PyModel {
    /// Parses model TOML text.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        Ok(PyModel { inner: load_model(text).map_err(err)? })
    }

    /// Reads a model file.
    #[staticmethod]
    fn load(path: std::path::PathBuf) -> PyResult<Self> {
        let text = std::fs::read_to_string(&path)?;
        Self::from_toml(&text)
    }

    /// The bundled Holling-Tanner model.
    #[staticmethod]
    fn holling_tanner() -> PyResult<Self> {
        Self::from_toml(HOLLING_TANNER)
    }

    #[getter]
    fn name(&self) -> &str {
        &self.inner.name
    }

    #[getter]
    fn params(&self) -> (String, String) {
        (self.inner.params[0].clone(), self.inner.params[1].clone())
    }

    #[getter]
    fn l(&self) -> f64 {
        self.inner.l
    }

    #[getter]
    fn equilibrium(&self) -> (f64, f64) {
        (self.inner.shift[0], self.inner.shift[1])
    }

    /// `(f, g)` at a state `(u, v, u_tau, v_tau)` relative to the equilibrium.
    fn reaction(&self, state: [f64; 4], mu: [f64; 2]) -> PyResult<(f64, f64)> {
        let r = self.inner.reaction(&state, mu).map_err(|e| PyValueError::new_err(e.to_string()))?;
        Ok((r[0], r[1]))
    }

    fn to_toml(&self) -> String {
        self.inner.to_toml()
    }

    fn __repr__(&self) -> String {
        format!("Model(name={:?}, params={:?})", self.inner.name, self.inner.params)
    }
}

/// Located point, normal form and amplitude system of a model.
#[pyclass(name = "Analysis", frozen)]
struct PyAnalysis {
    inner: Analysis,
}

#[pymethods]
impl PyAnalysis {
    #[new]
    fn new(py: Python<'_>, model: &PyModel) -> PyResult<Self> {
        let m = model.inner.clone();
        let inner = py.detach(move || Analysis::run(&m)).map_err(err)?;
        Ok(PyAnalysis { inner })
    }

    /// Parameter values at the point, in the model's own parameters.
    #[getter]
    fn mu(&self) -> (f64, f64) {
        (self.inner.point.mu[0], self.inner.point.mu[1])
    }

    /// Hopf frequency in unit-delay time.
    #[getter]
    fn omega(&self) -> f64 {
        self.inner.point.omega
    }

    /// Hopf frequency in the model's time.
    #[getter]
    fn omega_original(&self) -> f64 {
        self.inner.point.omega_original()
    }

    #[getter]
    fn n2(&self) -> u32 {
        self.inner.point.n2
    }

    #[getter]
    fn case(&self) -> &'static str {
        self.inner.case
    }

    /// `{name: complex}` for the eight normal-form coefficients.
    fn coefficients<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let c = &self.inner.normal_form.coeffs;
        let d = PyDict::new(py);
        let items: [(&str, Complex64); 8] = [
            ("f11_alpha1", c.f11_alpha[0]),
            ("f11_alpha2", c.f11_alpha[1]),
            ("f13_alpha1", c.f13_alpha[0]),
            ("f13_alpha2", c.f13_alpha[1]),
            ("g210", c.g210),
            ("g102", c.g102),
            ("g111", c.g111),
            ("g003", c.g003),
        ];
        for (k, v) in items {
            d.set_item(k, v)?;
        }
        Ok(d)
    }

    /// `{b, c, d, epsilon, d_minus_bc, eps1, eps2}` of the planar system.
    fn amplitude<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let s = &self.inner.amplitude;
        let d = PyDict::new(py);
        d.set_item("b", s.b)?;
        d.set_item("c", s.c)?;
        d.set_item("d", s.d)?;
        d.set_item("epsilon", s.epsilon)?;
        d.set_item("d_minus_bc", s.d_minus_bc)?;
        d.set_item("eps1", (s.eps1[0], s.eps1[1]))?;
        d.set_item("eps2", (s.eps2[0], s.eps2[1]))?;
        Ok(d)
    }

    fn point_summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.point_summary())
    }

    fn basis_summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.basis_summary())
    }

    fn coefficient_summary(&self, py: Python<'_>) -> PyResult<Py<PyAny>> {
        to_py(py, &self.inner.coefficient_summary())
    }

    /// Attractors predicted at `mu0 + alpha`.
    #[pyo3(signature = (alpha, rho = 0.01))]
    fn predict(&self, py: Python<'_>, alpha: [f64; 2], rho: f64) -> PyResult<Py<PyAny>> {
        let p = self.inner.predict(alpha, rho).map_err(err)?;
        to_py(py, &p)
    }

    /// Region summary over the square `[-half_width, half_width]^2`.
    #[pyo3(signature = (half_width = 0.2, resolution = 200))]
    fn regions(&self, py: Python<'_>, half_width: f64, resolution: usize) -> PyResult<Py<PyAny>> {
        let map = py.detach(|| self.inner.regions(half_width, resolution));
        to_py(py, &Analysis::region_summary(&map))
    }

    /// The full report as JSON text, byte-identical to `thk report`.
    #[pyo3(signature = (half_width = 0.2, resolution = 200, rho = 0.01))]
    fn report_json(&self, py: Python<'_>, half_width: f64, resolution: usize, rho: f64) -> PyResult<String> {
        let r = py.detach(|| self.inner.report(half_width, resolution, rho));
        to_json(&r).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    /// Integrates the PDE at `mu0 + alpha`.
    ///
    /// Unset options fall back to the model's `[simulate]` table.
    #[pyo3(signature = (alpha, points = None, horizon = None, steps_per_delay = None, stride = None, negate = false))]
    fn simulate(
        &self,
        py: Python<'_>,
        alpha: [f64; 2],
        points: Option<usize>,
        horizon: Option<f64>,
        steps_per_delay: Option<usize>,
        stride: Option<usize>,
        negate: bool,
    ) -> PyResult<PySimulation> {
        let mut cfg: SimConfig = self.inner.model.simulate.clone();
        if let Some(n) = points {
            cfg.points = n;
        }
        if let Some(t) = horizon {
            cfg.horizon = t;
        }
        if steps_per_delay.is_some() {
            cfg.steps_per_delay = steps_per_delay;
        }
        if stride.is_some() {
            cfg.stride = stride;
        }
        if negate {
            cfg = cfg.negated();
        }
        let mu = self.inner.mu_at(alpha);
        let model = &self.inner.model;
        let tr = py.detach(|| run_from(model, mu, &cfg, None)).map_err(err)?;
        Ok(PySimulation { inner: tr })
    }

    fn __repr__(&self) -> String {
        let p = &self.inner.point;
        format!("Analysis(mu=({:.6}, {:.6}), omega={:.6}, n2={}, case={})", p.mu[0], p.mu[1], p.omega, p.n2, self.inner.case)
    }
}

/// A recorded PDE solution.
#[pyclass(name = "Simulation", frozen)]
struct PySimulation {
    inner: Trajectory,
}

#[pymethods]
impl PySimulation {
    #[getter]
    fn x(&self) -> Vec<f64> {
        self.inner.x.clone()
    }

    #[getter]
    fn times(&self) -> Vec<f64> {
        self.inner.times.clone()
    }

    /// Snapshots of `u`, one list per recorded time.
    #[getter]
    fn u(&self) -> Vec<Vec<f64>> {
        self.inner.u.clone()
    }

    #[getter]
    fn v(&self) -> Vec<Vec<f64>> {
        self.inner.v.clone()
    }

    #[getter]
    fn dt(&self) -> f64 {
        self.inner.dt
    }

    /// Classifies the last `tail` fraction of the run.
    #[pyo3(signature = (tail = 0.25))]
    fn pattern(&self, py: Python<'_>, tail: f64) -> PyResult<Py<PyAny>> {
        let rep = analyze_pattern(&self.inner, tail).map_err(err)?;
        to_py(py, &rep)
    }

    fn write_csv(&self, path: std::path::PathBuf) -> PyResult<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        Ok(self.inner.write_csv(f)?)
    }

    fn write_binary(&self, path: std::path::PathBuf) -> PyResult<()> {
        let f = std::io::BufWriter::new(std::fs::File::create(path)?);
        Ok(self.inner.write_binary(f)?)
    }

    fn __len__(&self) -> usize {
        self.inner.times.len()
    }
}

/// Built-in golden checks as `(name, passed, detail)` tuples.
#[pyfunction]
#[pyo3(signature = (quick = true))]
fn selftest(py: Python<'_>, quick: bool) -> Vec<(String, bool, String)> {
    py.detach(|| ::turing_hopf::cli::selftest(!quick))
        .into_iter()
        .map(|c| (c.name, c.pass, c.detail))
        .collect()
}

#[pymodule]
#[pyo3(name = "turing_hopf")]
fn python_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("TuringHopfError", m.py().get_type::<TuringHopfError>())?;
    m.add_class::<PyModel>()?;
    m.add_class::<PyAnalysis>()?;
    m.add_class::<PySimulation>()?;
    m.add_function(wrap_pyfunction!(selftest, m)?)?;
    Ok(())
}

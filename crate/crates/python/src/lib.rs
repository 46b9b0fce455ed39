//! Python bindings, imported as `delaystab`.

use std::path::PathBuf;

use num_complex::Complex64;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyModule;
use serde::Serialize;

use delaystab::boundary;
use delaystab::closed_forms::{self, ScalarParams};
use delaystab::presets::Preset;
use delaystab::region::RegionCondition;
use delaystab::simulator::{self, SimParams};
use delaystab::specfile::{Overrides, SpecFile};
use delaystab::{CoeffExpr, EquationSpec, NonlinearTerm, NonlinearitySpec, QuadConfig};

fn err(e: delaystab::Error) -> PyErr {
    match e {
        delaystab::Error::Io(e) => PyRuntimeError::new_err(e.to_string()),
        other => PyValueError::new_err(other.to_string()),
    }
}

/// Serializes through JSON into plain Python objects.
fn to_py<T: Serialize>(py: Python<'_>, value: &T) -> PyResult<Py<PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    Ok(PyModule::import(py, "json")?.call_method1("loads", (text,))?.unbind())
}

/// A coefficient expression in `t`.
#[pyclass(name = "Expr", module = "delaystab", frozen)]
struct PyExpr(CoeffExpr);

#[pymethods]
impl PyExpr {
    #[new]
    fn new(text: &str) -> PyResult<Self> {
        CoeffExpr::parse(text).map(PyExpr).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    fn __call__(&self, t: f64) -> PyResult<f64> {
        self.0.eval(t).map_err(|e| PyValueError::new_err(e.to_string()))
    }

    #[getter]
    fn is_constant(&self) -> bool {
        self.0.is_constant()
    }

    fn __str__(&self) -> String {
        self.0.to_string()
    }

    fn __repr__(&self) -> String {
        format!("Expr({:?})", self.0.to_string())
    }
}

/// A scalar delay equation.
#[pyclass(name = "Equation", module = "delaystab", frozen)]
struct PyEquation {
    spec: EquationSpec,
    settings: Overrides,
}

#[pymethods]
impl PyEquation {
    /// `a` holds `a_0..a_n`, `b` holds `b_1..b_n`; coefficients are
    /// expression strings. `nonlinearity` lists `(coeff, delay, power)`.
    #[new]
    #[pyo3(signature = (delays, a, b, sigma = "0", tau = 0.0, nonlinearity = vec![]))]
    fn new(
        delays: Vec<f64>,
        a: Vec<String>,
        b: Vec<String>,
        sigma: &str,
        tau: f64,
        nonlinearity: Vec<(f64, f64, f64)>,
    ) -> PyResult<Self> {
        let terms = nonlinearity.into_iter().map(|(coeff, delay, power)| NonlinearTerm { coeff, delay, power });
        let nl = NonlinearitySpec::new(terms.collect()).map_err(err)?;
        let a: Vec<&str> = a.iter().map(String::as_str).collect();
        let b: Vec<&str> = b.iter().map(String::as_str).collect();
        let spec = EquationSpec::parse(&delays, &a, &b, sigma, tau, nl).map_err(err)?;
        Ok(PyEquation { spec, settings: Overrides::default() })
    }

    /// Parses a TOML equation file's contents.
    #[staticmethod]
    fn from_toml(text: &str) -> PyResult<Self> {
        let f = SpecFile::parse(text).map_err(err)?;
        Ok(PyEquation { spec: f.spec, settings: f.settings })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        let f = SpecFile::load(&path).map_err(err)?;
        Ok(PyEquation { spec: f.spec, settings: f.settings })
    }

    /// Equation of a built-in experiment: fig4, fig5 or fig6.
    #[staticmethod]
    fn preset(name: &str) -> PyResult<Self> {
        let p: Preset = name.parse().map_err(err)?;
        let init = Some(p.sim_params().init);
        Ok(PyEquation { spec: p.spec().map_err(err)?, settings: Overrides { init, ..Default::default() } })
    }

    #[getter]
    fn n(&self) -> usize {
        self.spec.n()
    }

    #[getter]
    fn max_delay(&self) -> f64 {
        self.spec.max_delay()
    }

    #[getter]
    fn time_invariant(&self) -> bool {
        self.spec.is_time_invariant()
    }

    /// One verdict dict per decomposition `(n1, n2)`.
    #[pyo3(signature = (t_max = None, grid = None, panels = None))]
    fn check(
        &self,
        py: Python<'_>,
        t_max: Option<f64>,
        grid: Option<usize>,
        panels: Option<usize>,
    ) -> PyResult<Py<PyAny>> {
        let flags = Overrides { t_max, grid, panels, ..Default::default() }.or(self.settings.clone());
        let scan = flags.scan(self.spec.max_delay()).map_err(err)?;
        let quad = flags.quad().map_err(err)?;
        let spec = &self.spec;
        let report = py.detach(|| delaystab::multi_condition(spec, scan, quad));
        to_py(py, &report.entries)
    }

    /// Monte Carlo batch; returns `{"dt", "values", "classes", "counts"}`.
    #[pyo3(signature = (paths = None, dt = None, t_end = None, seed = None, init = None))]
    fn simulate(
        &self,
        py: Python<'_>,
        paths: Option<usize>,
        dt: Option<f64>,
        t_end: Option<f64>,
        seed: Option<u64>,
        init: Option<&str>,
    ) -> PyResult<Py<PyAny>> {
        let init = init.map(CoeffExpr::parse).transpose().map_err(|e| PyValueError::new_err(e.to_string()))?;
        let flags = Overrides { paths, dt, t_end, seed, init, ..Default::default() }.or(self.settings.clone());
        let params = flags.sim(SimParams::default()).map_err(err)?;
        let spec = &self.spec;
        let batch = py.detach(|| simulator::simulate_batch(spec, &params)).map_err(err)?;

        #[derive(Serialize)]
        struct Out<'a> {
            dt: f64,
            values: Vec<&'a [f64]>,
            classes: Vec<String>,
            counts: simulator::ClassCounts,
        }
        let out = Out {
            dt: params.dt,
            values: batch.trajectories.iter().map(|t| t.values.as_slice()).collect(),
            classes: batch.summaries.iter().map(|s| s.class.to_string()).collect(),
            counts: batch.counts,
        };
        to_py(py, &out)
    }
}

/// Whether `condition` (e.g. "combined", "generic:1:1") admits `(a, b)`.
#[pyfunction]
#[pyo3(signature = (condition, a, b, h, p, tau = 0.0, mu = 0.0, nu = 0.0))]
#[allow(clippy::too_many_arguments)]
fn region(condition: &str, a: f64, b: f64, h: f64, p: f64, tau: f64, mu: f64, nu: f64) -> PyResult<bool> {
    let cond: RegionCondition = condition.parse().map_err(err)?;
    let pp = ScalarParams { a, b, c: 0.0, h, p, tau, mu, nu };
    cond.evaluate(&pp, delaystab::ScanConfig::for_max_delay(h.max(tau)), QuadConfig::default()).map_err(err)
}

/// Largest `p` admitted by the combined condition.
#[pyfunction]
fn combined_p_max(a: f64, b: f64, h: f64) -> f64 {
    closed_forms::combined_p_max(a, b, h)
}

#[pyfunction]
fn boundary_point(beta: f64, h: f64) -> PyResult<(f64, f64)> {
    boundary::boundary_point(beta, h).map(|p| (p.a, p.b)).map_err(err)
}

/// `(beta, a, b)` rows on evenly spaced `beta`.
#[pyfunction]
fn boundary_curve(h: f64, beta_lo: f64, beta_hi: f64, n: usize) -> PyResult<Vec<(f64, f64, f64)>> {
    let pts = boundary::boundary_curve(h, beta_lo, beta_hi, n).map_err(err)?;
    Ok(pts.into_iter().map(|p| (p.beta, p.a, p.b)).collect())
}

#[pyfunction]
fn characteristic_residual(a: f64, b: f64, h: f64, omega: Complex64) -> PyResult<Complex64> {
    boundary::characteristic_residual(a, b, h, omega).map_err(err)
}

#[pymodule]
#[pyo3(name = "delaystab")]
fn delaystab_module(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyExpr>()?;
    m.add_class::<PyEquation>()?;
    m.add_function(wrap_pyfunction!(region, m)?)?;
    m.add_function(wrap_pyfunction!(combined_p_max, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_point, m)?)?;
    m.add_function(wrap_pyfunction!(boundary_curve, m)?)?;
    m.add_function(wrap_pyfunction!(characteristic_residual, m)?)?;
    m.add("X_STAR", boundary::X_STAR)?;
    m.add("PRESETS", Preset::ALL.map(Preset::name).to_vec())?;
    Ok(())
}

//! Python bindings. Results come back as plain dicts and lists; the
//! computations are the Rust ones, unchanged.

use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use serde_json::{json, Value};

use splitgap::ed::{splitting_ed, EigensolverConfig, Method};
use splitgap::instanton::{analytic_action, hessian_vd_check, minimize_reduced_action, predict_log_delta_chain};
use splitgap::numerics::QuadConfig;
use splitgap::rotor::{appendix_d_verify, log_delta_rotor, RotorParams};
use splitgap::scaling::{fit_stretched, FitModel, ScalingDataset};
use splitgap::toy::{asymptotic_log_delta_toy, dense_oracle_toy, solve_splitting_secular, time_domain_delta, OperatorChoice};
use splitgap::{Beta, CouplingKind, Error, ModelParams};

/// Whether an error is the caller's fault (bad input) or the solver's.
fn is_input_error(e: &Error) -> bool {
    matches!(
        e,
        Error::InvalidParams(_)
            | Error::InvalidCoupling(_)
            | Error::DimensionMismatch { .. }
            | Error::TooLarge { .. }
            | Error::NonPositiveMass { .. }
            | Error::Unsupported(_)
    )
}

fn py_err(e: Error) -> PyErr {
    if is_input_error(&e) {
        PyValueError::new_err(e.to_string())
    } else {
        PyRuntimeError::new_err(e.to_string())
    }
}

fn to_py(py: Python<'_>, value: &Value) -> PyResult<Py<PyAny>> {
    let text = value.to_string();
    Ok(py.import("json")?.call_method1("loads", (text,))?.unbind())
}

#[pyclass(name = "ModelParams", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModelParams {
    inner: ModelParams,
}

#[pymethods]
impl PyModelParams {
    /// `lam` is the perturbation strength (`lambda` is reserved in Python).
    #[new]
    #[pyo3(signature = (l, lam, alpha, coupling = "all-to-all", beta = None))]
    fn new(l: usize, lam: f64, alpha: f64, coupling: &str, beta: Option<f64>) -> PyResult<Self> {
        let coupling: CouplingKind = coupling.parse().map_err(py_err)?;
        let mut inner = ModelParams::new(l, lam, alpha, coupling).map_err(py_err)?;
        if let Some(b) = beta {
            inner = inner.with_beta(b.to_string().parse::<Beta>().map_err(py_err)?);
            inner.validate().map_err(py_err)?;
        }
        Ok(PyModelParams { inner })
    }

    #[allow(non_snake_case)]
    #[getter]
    fn L(&self) -> usize {
        self.inner.l
    }

    #[getter]
    fn lam(&self) -> f64 {
        self.inner.lambda
    }

    #[getter]
    fn alpha(&self) -> f64 {
        self.inner.alpha
    }

    #[getter]
    fn coupling(&self) -> String {
        self.inner.coupling.to_string()
    }

    fn to_json(&self) -> String {
        self.inner.to_canonical_json()
    }

    fn __repr__(&self) -> String {
        format!(
            "ModelParams(L={}, lam={}, alpha={}, coupling='{}')",
            self.inner.l, self.inner.lambda, self.inner.alpha, self.inner.coupling
        )
    }
}

fn ed_value(p: &ModelParams, method: &str, tol: f64, seed: u64) -> Result<Value, Error> {
    let method = match method {
        "lanczos" => Method::Lanczos,
        "dense" => Method::Dense,
        other => return Err(Error::InvalidParams(format!("unknown method '{other}'"))),
    };
    let cfg = EigensolverConfig {
        method,
        tol,
        seed,
        ..EigensolverConfig::default()
    };
    let r = splitting_ed(p, &cfg)?;
    Ok(serde_json::to_value(r).expect("results serialize"))
}

fn toy_value(p: &ModelParams, choice: &str, route: &str) -> Result<Value, Error> {
    let choice: OperatorChoice = choice.parse()?;
    let delta = match route {
        "secular" => serde_json::to_value(solve_splitting_secular(&choice, p)?).expect("results serialize"),
        "dense" => serde_json::to_value(dense_oracle_toy(&choice, p)?).expect("results serialize"),
        "time-domain" => json!({"delta": time_domain_delta(&choice, p, QuadConfig::default())?}),
        other => return Err(Error::InvalidParams(format!("unknown route '{other}'"))),
    };
    Ok(delta)
}

fn fit_value(pairs: &[(usize, f64)], model: &str) -> Result<Value, Error> {
    let model: FitModel = model.parse()?;
    let data = ScalingDataset::from_pairs(pairs, "python")?;
    Ok(serde_json::to_value(fit_stretched(&data, model)?).expect("reports serialize"))
}

/// Ground-state splitting of the spin chain by exact diagonalization.
#[pyfunction]
#[pyo3(signature = (params, method = "lanczos", tol = 1e-12, seed = 0x5EED))]
fn splitting(py: Python<'_>, params: &PyModelParams, method: &str, tol: f64, seed: u64) -> PyResult<Py<PyAny>> {
    let p = params.inner.clone();
    let v = py.detach(move || ed_value(&p, method, tol, seed)).map_err(py_err)?;
    to_py(py, &v)
}

/// Leading large-L `log delta` of the all-to-all chain.
#[pyfunction]
fn chain_log_delta_asymptotic(params: &PyModelParams) -> PyResult<f64> {
    predict_log_delta_chain(&params.inner).map_err(py_err)
}

/// Minimizes the reduced instanton action on a uniform grid.
#[pyfunction]
#[pyo3(signature = (params, beta, grid = 8192))]
fn instanton_action(py: Python<'_>, params: &PyModelParams, beta: f64, grid: usize) -> PyResult<Py<PyAny>> {
    let m = minimize_reduced_action(&params.inner, beta, grid).map_err(py_err)?;
    let v = json!({
        "action": m.action.total,
        "potential_term": m.action.potential_term,
        "kinetic_term": m.action.kinetic_term,
        "error_estimate": m.action.error_estimate,
        "analytic": analytic_action(&params.inner, beta),
        "iterations": m.iterations,
    });
    to_py(py, &v)
}

/// Discretized kernel spectrum against its closed form.
#[pyfunction]
#[pyo3(signature = (params, beta, grid = 1024))]
fn kernel_check(py: Python<'_>, params: &PyModelParams, beta: f64, grid: usize) -> PyResult<Py<PyAny>> {
    let t = hessian_vd_check(&params.inner, beta, grid).map_err(py_err)?;
    to_py(py, &serde_json::to_value(t).expect("tables serialize"))
}

/// Semiclassical rotor splitting; `params` must use a power-law or custom coupling.
#[pyfunction]
fn rotor(py: Python<'_>, params: &PyModelParams, g: f64) -> PyResult<Py<PyAny>> {
    let rp = RotorParams::new(params.inner.clone(), g).map_err(py_err)?;
    let s = log_delta_rotor(&rp).map_err(py_err)?;
    to_py(py, &serde_json::to_value(s).expect("results serialize"))
}

/// Finite-beta assembly of the rotor determinant ratio.
#[pyfunction]
#[pyo3(signature = (params, g, beta = 50.0, nmax = 10_000))]
fn rotor_determinant(py: Python<'_>, params: &PyModelParams, g: f64, beta: f64, nmax: usize) -> PyResult<Py<PyAny>> {
    let rp = RotorParams::new(params.inner.clone(), g).map_err(py_err)?;
    let r = appendix_d_verify(&rp, beta, nmax).map_err(py_err)?;
    to_py(py, &serde_json::to_value(r).expect("reports serialize"))
}

/// Toy-model splitting by `secular`, `time-domain` or `dense` route.
#[pyfunction]
#[pyo3(signature = (params, choice = "sigma-x", route = "secular"))]
fn toy(py: Python<'_>, params: &PyModelParams, choice: &str, route: &str) -> PyResult<Py<PyAny>> {
    let p = params.inner.clone();
    let v = py.detach(move || toy_value(&p, choice, route)).map_err(py_err)?;
    to_py(py, &v)
}

/// Leading large-L `log|delta|` of the toy model.
#[pyfunction]
#[pyo3(signature = (params, choice = "sigma-x"))]
fn toy_log_delta_asymptotic(params: &PyModelParams, choice: &str) -> PyResult<f64> {
    let choice: OperatorChoice = choice.parse().map_err(py_err)?;
    asymptotic_log_delta_toy(&choice, &params.inner).map_err(py_err)
}

/// Fits `-log delta = C L^p (+ b log L)` to `(L, log_delta)` pairs.
#[pyfunction]
#[pyo3(signature = (pairs, model = "auto"))]
fn fit(py: Python<'_>, pairs: Vec<(usize, f64)>, model: &str) -> PyResult<Py<PyAny>> {
    let v = fit_value(&pairs, model).map_err(py_err)?;
    to_py(py, &v)
}

#[pymodule]
fn splitgap_py(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add_class::<PyModelParams>()?;
    m.add_function(wrap_pyfunction!(splitting, m)?)?;
    m.add_function(wrap_pyfunction!(chain_log_delta_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(instanton_action, m)?)?;
    m.add_function(wrap_pyfunction!(kernel_check, m)?)?;
    m.add_function(wrap_pyfunction!(rotor, m)?)?;
    m.add_function(wrap_pyfunction!(rotor_determinant, m)?)?;
    m.add_function(wrap_pyfunction!(toy, m)?)?;
    m.add_function(wrap_pyfunction!(toy_log_delta_asymptotic, m)?)?;
    m.add_function(wrap_pyfunction!(fit, m)?)?;
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    Ok(())
}

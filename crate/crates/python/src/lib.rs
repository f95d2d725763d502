//! Python bindings: `import dhawkes`.
//!
//! Structured results (deviation expansions, Monte Carlo estimates, CGF
//! evaluations) come back as plain dicts with the same keys as the CLI JSON.

use hawkes_deviations::deviations::{self, oracle, DeviationMode, DeviationQuery};
use hawkes_deviations::{cgf, modphi, simulator, ExcitingKernel, HawkesModel};
use num_complex::Complex64;
use pyo3::create_exception;
use pyo3::exceptions::PyValueError;
use pyo3::prelude::*;
use pyo3::types::PyDict;
use serde::Serialize;

create_exception!(dhawkes, HawkesError, PyValueError, "Domain, model or convergence error.");

fn err(e: hawkes_deviations::Error) -> PyErr {
    HawkesError::new_err(e.to_string())
}

fn to_dict<'py, T: Serialize>(py: Python<'py>, value: &T) -> PyResult<Bound<'py, PyAny>> {
    let text = serde_json::to_string(value).map_err(|e| HawkesError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (text,))
}

/// Discrete-time linear Hawkes model: baseline `nu` and an exciting kernel.
#[pyclass(name = "Model", frozen, skip_from_py_object)]
#[derive(Clone)]
struct PyModel {
    inner: HawkesModel,
}

#[pymethods]
impl PyModel {
    /// Model with finitely many kernel weights `alpha_1, alpha_2, ...`.
    #[staticmethod]
    fn finite(nu: f64, weights: Vec<f64>) -> PyResult<Self> {
        let k = ExcitingKernel::finite(weights).map_err(err)?;
        Ok(Self {
            inner: HawkesModel::new(nu, k).map_err(err)?,
        })
    }

    /// Model with `alpha_i = a * r**i`.
    #[staticmethod]
    fn geometric(nu: f64, a: f64, r: f64) -> PyResult<Self> {
        let k = ExcitingKernel::geometric(a, r).map_err(err)?;
        Ok(Self {
            inner: HawkesModel::new(nu, k).map_err(err)?,
        })
    }

    #[staticmethod]
    fn poisson(nu: f64) -> PyResult<Self> {
        Ok(Self {
            inner: HawkesModel::poisson(nu).map_err(err)?,
        })
    }

    /// Parses `{"nu": ..., "kernel": {"type": "finite"|"geometric", ...}}`.
    #[staticmethod]
    fn from_json(text: &str) -> PyResult<Self> {
        Ok(Self {
            inner: HawkesModel::from_json(text).map_err(err)?,
        })
    }

    fn to_json(&self) -> PyResult<String> {
        let d = self
            .inner
            .descriptor()
            .ok_or_else(|| HawkesError::new_err("custom kernels have no JSON form"))?;
        serde_json::to_string(&d).map_err(|e| HawkesError::new_err(e.to_string()))
    }

    #[getter]
    fn nu(&self) -> f64 {
        self.inner.nu()
    }

    #[getter]
    fn branching_ratio(&self) -> f64 {
        self.inner.branching_ratio()
    }

    #[getter]
    fn mean_rate(&self) -> f64 {
        self.inner.mean_rate()
    }

    #[getter]
    fn variance_rate(&self) -> f64 {
        self.inner.variance_rate()
    }

    /// Right end of the CGF domain; `inf` for the Poisson model.
    #[getter]
    fn theta_c(&self) -> f64 {
        self.inner.theta_bound().value()
    }

    fn weight(&self, i: usize) -> f64 {
        self.inner.kernel().weight(i)
    }

    fn __repr__(&self) -> String {
        match self.to_json() {
            Ok(j) => format!("Model({j})"),
            Err(_) => format!("Model(nu={}, beta={})", self.inner.nu(), self.inner.branching_ratio()),
        }
    }
}

/// `x(theta)`, `eta(theta)` and `order` derivatives of each.
#[pyfunction]
#[pyo3(signature = (model, theta, order = 2))]
fn solve_x<'py>(py: Python<'py>, model: &PyModel, theta: f64, order: usize) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &cgf::x_derivatives(&model.inner, theta, order).map_err(err)?)
}

/// `log E[exp(z N_t)]` from the exact recursion; `z` may be complex.
#[pyfunction]
fn log_mgf(model: &PyModel, z: Complex64, t: usize) -> PyResult<Complex64> {
    if z.im == 0.0 {
        return modphi::log_mgf(&model.inner, z.re, t).map(|v| Complex64::new(v, 0.0)).map_err(err);
    }
    modphi::log_mgf(&model.inner, z, t).map_err(err)
}

/// `(phi(z), psi(z))` with a certified truncation at tolerance `tol`.
#[pyfunction]
#[pyo3(signature = (model, z, tol = 1e-12))]
fn phi_psi(model: &PyModel, z: Complex64, tol: f64) -> PyResult<(Complex64, Complex64)> {
    let l = modphi::phi_psi(&model.inner, z, tol).map_err(err)?;
    Ok((l.phi(), l.psi()))
}

/// `|E[exp(z N_t)] exp(-t eta(z)) - psi(z)|`.
#[pyfunction]
fn modphi_residual(model: &PyModel, z: Complex64, t: usize) -> PyResult<f64> {
    modphi::modphi_residual(&model.inner, z, t).map_err(err)
}

#[pyfunction]
fn rate(model: &PyModel, x: f64) -> f64 {
    deviations::rate(&model.inner, x)
}

#[pyfunction]
fn theta_star(model: &PyModel, x: f64) -> PyResult<f64> {
    deviations::theta_star(&model.inner, x).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, theta, k_max = 3))]
fn coefficients_a(model: &PyModel, theta: f64, k_max: usize) -> PyResult<Vec<f64>> {
    deviations::coefficients_a(&model.inner, theta, k_max).map_err(err)
}

#[pyfunction]
#[pyo3(signature = (model, theta, k_max = 3))]
fn coefficients_b(model: &PyModel, theta: f64, k_max: usize) -> PyResult<Vec<f64>> {
    deviations::coefficients_b(&model.inner, theta, k_max).map_err(err)
}

fn expansion<'py>(py: Python<'py>, model: &PyModel, t: u64, x: f64, v: usize, mode: DeviationMode) -> PyResult<Bound<'py, PyAny>> {
    let q = DeviationQuery {
        model: model.inner.clone(),
        t,
        x,
        order: v,
        mode,
    };
    let r = match mode {
        DeviationMode::Pmf => deviations::pmf_expansion(&q),
        DeviationMode::Tail => deviations::tail_expansion(&q),
    }
    .map_err(err)?;
    to_dict(py, &r)
}

/// Expansion of `P(N_t = t x)` with `v - 1` correction terms.
#[pyfunction]
#[pyo3(signature = (model, t, x, v = 2))]
fn pmf<'py>(py: Python<'py>, model: &PyModel, t: u64, x: f64, v: usize) -> PyResult<Bound<'py, PyAny>> {
    expansion(py, model, t, x, v, DeviationMode::Pmf)
}

/// Expansion of `P(N_t >= t x)` with `v - 1` correction terms.
#[pyfunction]
#[pyo3(signature = (model, t, x, v = 2))]
fn tail<'py>(py: Python<'py>, model: &PyModel, t: u64, x: f64, v: usize) -> PyResult<Bound<'py, PyAny>> {
    expansion(py, model, t, x, v, DeviationMode::Tail)
}

#[pyfunction]
#[pyo3(signature = (model, t, y, m = 3))]
fn moderate<'py>(py: Python<'py>, model: &PyModel, t: u64, y: f64, m: u32) -> PyResult<Bound<'py, PyAny>> {
    to_dict(py, &deviations::moderate_expansion(&model.inner, t, y, m).map_err(err)?)
}

/// `P(N_t = n)` by Fourier inversion of the exact MGF.
#[pyfunction]
fn fourier_pmf(py: Python<'_>, model: &PyModel, t: u64, n: u64) -> PyResult<f64> {
    py.detach(|| oracle::fourier_pmf(&model.inner, t, n)).map_err(err)
}

/// `P(N_t >= n)` by Fourier inversion of the exact MGF.
#[pyfunction]
fn fourier_tail(py: Python<'_>, model: &PyModel, t: u64, n: u64) -> PyResult<f64> {
    py.detach(|| oracle::fourier_tail(&model.inner, t, n)).map_err(err)
}

/// One seeded path: dict with `counts`, `intensities` and `total`.
#[pyfunction]
#[pyo3(signature = (model, t, seed, path = 0))]
fn simulate_path<'py>(py: Python<'py>, model: &PyModel, t: usize, seed: u64, path: u64) -> PyResult<Bound<'py, PyAny>> {
    let p = simulator::simulate_path_indexed(&model.inner, t, seed, path).map_err(err)?;
    let d = PyDict::new(py);
    d.set_item("counts", p.counts)?;
    d.set_item("intensities", p.intensities)?;
    d.set_item("total", p.total)?;
    Ok(d.into_any())
}

/// `N_t` for paths `0..n_paths`.
#[pyfunction]
fn simulate_totals(py: Python<'_>, model: &PyModel, t: usize, n_paths: usize, seed: u64) -> PyResult<Vec<u64>> {
    py.detach(|| simulator::simulate_totals(&model.inner, t, n_paths, seed)).map_err(err)
}

/// Monte Carlo `(mean, var)` of `N_t / t` and `Var(N_t) / t`.
#[pyfunction]
fn mc_mean_variance<'py>(
    py: Python<'py>,
    model: &PyModel,
    t: usize,
    n_paths: usize,
    seed: u64,
) -> PyResult<(Bound<'py, PyAny>, Bound<'py, PyAny>)> {
    let (m, v) = py
        .detach(|| simulator::mc_mean_variance(&model.inner, t, n_paths, seed))
        .map_err(err)?;
    Ok((to_dict(py, &m)?, to_dict(py, &v)?))
}

/// Monte Carlo frequency of `N_t >= t x`.
#[pyfunction]
fn mc_tail<'py>(py: Python<'py>, model: &PyModel, t: usize, x: f64, n_paths: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let e = py
        .detach(|| simulator::mc_tail(&model.inner, t, x, n_paths, seed))
        .map_err(err)?;
    to_dict(py, &e)
}

/// Monte Carlo estimate of `E[exp(z N_t)]`.
#[pyfunction]
fn mc_mgf<'py>(py: Python<'py>, model: &PyModel, z: f64, t: usize, n_paths: usize, seed: u64) -> PyResult<Bound<'py, PyAny>> {
    let e = py
        .detach(|| simulator::mc_mgf(&model.inner, z, t, n_paths, seed))
        .map_err(err)?;
    to_dict(py, &e)
}

#[pymodule]
fn dhawkes(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("HawkesError", m.py().get_type::<HawkesError>())?;
    m.add_class::<PyModel>()?;
    m.add_function(wrap_pyfunction!(solve_x, m)?)?;
    m.add_function(wrap_pyfunction!(log_mgf, m)?)?;
    m.add_function(wrap_pyfunction!(phi_psi, m)?)?;
    m.add_function(wrap_pyfunction!(modphi_residual, m)?)?;
    m.add_function(wrap_pyfunction!(rate, m)?)?;
    m.add_function(wrap_pyfunction!(theta_star, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients_a, m)?)?;
    m.add_function(wrap_pyfunction!(coefficients_b, m)?)?;
    m.add_function(wrap_pyfunction!(pmf, m)?)?;
    m.add_function(wrap_pyfunction!(tail, m)?)?;
    m.add_function(wrap_pyfunction!(moderate, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_pmf, m)?)?;
    m.add_function(wrap_pyfunction!(fourier_tail, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_path, m)?)?;
    m.add_function(wrap_pyfunction!(simulate_totals, m)?)?;
    m.add_function(wrap_pyfunction!(mc_mean_variance, m)?)?;
    m.add_function(wrap_pyfunction!(mc_tail, m)?)?;
    m.add_function(wrap_pyfunction!(mc_mgf, m)?)?;
    Ok(())
}

//! Python bindings. Grids cross the boundary as flat lists in storage order
//! (first coordinate fastest), together with `d` and `n`.

use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use pyo3::types::PyDict;

use dsod_core::field::{covariance_h as core_covariance_h, sample_chi as core_sample_chi, sample_eta as core_sample_eta};
use dsod_core::green::{hitting_times_to, mass_constant_l_from, mass_constant_l_spectral};
use dsod_core::kernel::{kernel_limit, kernel_lowdim, kernel_mollified, periodized_singularity, KernelQuery, KernelValue};
use dsod_core::limit::{
    exact_pairing_variance, moment_from_samples, remainder_variance, sobolev_norm_field, sobolev_norm_minus1,
    PairingExperiment, PairingMode, TestFunction as CoreTestFunction,
};
use dsod_core::sandpile::{self, SandpileConfig, WeightDistribution, DEFAULT_MAX_SWEEPS, DEFAULT_TOL};
use dsod_core::torus::{check_eigenvalue_bounds, RealGrid, TorusLattice};
use dsod_core::Error;

create_exception!(dsod, NonConvergence, PyRuntimeError, "Stabilization ran out of sweeps.");
create_exception!(dsod, InvalidMath, PyValueError, "The request is mathematically ill-posed.");

fn py_err(e: Error) -> PyErr {
    match e {
        Error::NonConvergence { .. } | Error::Cancelled { .. } => NonConvergence::new_err(e.to_string()),
        e if e.is_invalid_math() => InvalidMath::new_err(e.to_string()),
        e => PyValueError::new_err(e.to_string()),
    }
}

fn grid(d: usize, values: Vec<f64>) -> PyResult<RealGrid> {
    let n = (values.len() as f64).powf(1.0 / d as f64).round() as usize;
    let lat = TorusLattice::new(d, n).map_err(py_err)?;
    RealGrid::from_vec(lat, values).map_err(py_err)
}

fn lattice(d: usize, n: usize) -> PyResult<TorusLattice> {
    TorusLattice::new(d, n).map_err(py_err)
}

fn distribution(name: &str) -> PyResult<WeightDistribution> {
    name.parse().map_err(py_err)
}

/// The discrete torus `Z_n^d`.
#[pyclass(frozen, name = "Torus")]
struct Torus {
    inner: TorusLattice,
}

#[pymethods]
impl Torus {
    #[new]
    fn new(d: usize, n: usize) -> PyResult<Self> {
        Ok(Torus { inner: lattice(d, n)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    #[getter]
    fn n(&self) -> usize {
        self.inner.n()
    }

    #[getter]
    fn size(&self) -> usize {
        self.inner.size()
    }

    fn coords(&self, index: usize) -> Vec<usize> {
        self.inner.coords(index)
    }

    /// Eigenvalues of the graph Laplacian in storage order of frequencies.
    fn eigenvalues(&self) -> Vec<f64> {
        self.inner.eigenvalues()
    }

    /// Exhaustive check of the eigenvalue sandwich over all `a ≠ 0`.
    fn check_eigenvalue_bounds<'py>(&self, py: Python<'py>) -> PyResult<Bound<'py, PyDict>> {
        let r = check_eigenvalue_bounds(&self.inner);
        let out = PyDict::new(py);
        out.set_item("checked", r.checked)?;
        out.set_item("lower_violations", r.lower_violations)?;
        out.set_item("sandwich_violations", r.sandwich_violations)?;
        out.set_item("constant_c", r.constant_c)?;
        out.set_item("passed", r.passed())?;
        Ok(out)
    }

    fn __repr__(&self) -> String {
        format!("Torus(d={}, n={})", self.inner.d(), self.inner.n())
    }
}

/// A real trigonometric polynomial on `T^d`.
#[pyclass(frozen, name = "TestFunction")]
struct TestFunction {
    inner: CoreTestFunction,
}

#[pymethods]
impl TestFunction {
    /// `text` is "nu:coeff,...", with the components of `nu` separated by ';'.
    #[new]
    fn new(d: usize, text: &str) -> PyResult<Self> {
        Ok(TestFunction { inner: CoreTestFunction::parse(d, text).map_err(py_err)? })
    }

    #[staticmethod]
    fn cosine(nu: Vec<i64>, amplitude: f64) -> PyResult<Self> {
        Ok(TestFunction { inner: CoreTestFunction::cosine(&nu, amplitude).map_err(py_err)? })
    }

    #[getter]
    fn d(&self) -> usize {
        self.inner.d()
    }

    fn __call__(&self, x: Vec<f64>) -> PyResult<f64> {
        if x.len() != self.inner.d() {
            return Err(PyValueError::new_err(format!("expected {} coordinates", self.inner.d())));
        }
        Ok(self.inner.evaluate(&x))
    }

    /// `‖u‖²_{−1}`, the limiting variance of the pairing.
    fn norm_minus1(&self) -> f64 {
        sobolev_norm_minus1(&self.inner)
    }

    fn exact_pairing_variance(&self, n: usize) -> PyResult<f64> {
        exact_pairing_variance(&self.inner, &lattice(self.inner.d(), n)?).map_err(py_err)
    }

    fn remainder_variance(&self, n: usize) -> PyResult<f64> {
        remainder_variance(&self.inner, &lattice(self.inner.d(), n)?).map_err(py_err)
    }

    /// Pairing values of `trials` independent runs.
    #[pyo3(signature = (n, trials, seed, mode = "w", dist = "gaussian", tol = DEFAULT_TOL, max_sweeps = DEFAULT_MAX_SWEEPS))]
    #[allow(clippy::too_many_arguments)]
    fn pairing_samples(
        &self,
        py: Python<'_>,
        n: usize,
        trials: usize,
        seed: u64,
        mode: &str,
        dist: &str,
        tol: f64,
        max_sweeps: u64,
    ) -> PyResult<Vec<f64>> {
        let mode: PairingMode = mode.parse().map_err(py_err)?;
        let exp = PairingExperiment::new(&self.inner, lattice(self.inner.d(), n)?, mode, distribution(dist)?)
            .map_err(py_err)?
            .with_stabilization(tol, max_sweeps);
        py.detach(|| exp.samples(trials, seed)).map_err(py_err)
    }

    fn __repr__(&self) -> String {
        format!("TestFunction(d={}, \"{}\")", self.inner.d(), self.inner)
    }
}

/// Stabilizes the configuration `mass` on the `d`-dimensional torus.
#[pyfunction]
#[pyo3(signature = (mass, d = 1, tol = DEFAULT_TOL, max_sweeps = DEFAULT_MAX_SWEEPS))]
fn stabilize<'py>(py: Python<'py>, mass: Vec<f64>, d: usize, tol: f64, max_sweeps: u64) -> PyResult<Bound<'py, PyDict>> {
    let s = SandpileConfig::new(grid(d, mass)?);
    let st = py.detach(|| sandpile::stabilize(&s, tol, max_sweeps)).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("odometer", st.odometer.values().values().to_vec())?;
    out.set_item("odometer_raw", st.odometer.raw().values().to_vec())?;
    out.set_item("final", st.final_config.mass().values().to_vec())?;
    out.set_item("sweeps", st.sweeps)?;
    out.set_item("residual", st.residual)?;
    Ok(out)
}

/// Odometer of `mass` from the Poisson equation, shifted to minimum zero.
#[pyfunction]
#[pyo3(signature = (mass, d = 1))]
fn spectral_odometer(mass: Vec<f64>, d: usize) -> PyResult<Vec<f64>> {
    let s = SandpileConfig::new(grid(d, mass)?);
    Ok(dsod_core::green::spectral_odometer(&s).map_err(py_err)?.values().values().to_vec())
}

/// `1 + σ(x) − (1/n^d) Σ σ` for weights `sigma`.
#[pyfunction]
#[pyo3(signature = (sigma, d = 1))]
fn init_configuration(sigma: Vec<f64>, d: usize) -> PyResult<Vec<f64>> {
    Ok(sandpile::init_configuration(&grid(d, sigma)?).into_mass().into_values())
}

#[pyfunction]
#[pyo3(signature = (d, n, seed, dist = "gaussian"))]
fn draw_weights(d: usize, n: usize, seed: u64, dist: &str) -> PyResult<Vec<f64>> {
    Ok(sandpile::draw_weights(&lattice(d, n)?, &distribution(dist)?, seed).into_values())
}

/// `w = (2d)^{-1} Σ_y g(x, y) σ(y)`.
#[pyfunction]
#[pyo3(signature = (sigma, d = 1))]
fn w_field(sigma: Vec<f64>, d: usize) -> PyResult<Vec<f64>> {
    Ok(dsod_core::green::w_field(&grid(d, sigma)?).into_values())
}

#[pyfunction]
fn sample_chi(d: usize, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(core_sample_chi(&lattice(d, n)?, seed).values.into_values())
}

#[pyfunction]
fn sample_eta(d: usize, n: usize, seed: u64) -> PyResult<Vec<f64>> {
    Ok(core_sample_eta(&lattice(d, n)?, seed).values.into_values())
}

/// Covariance `H(x, y)` of the field χ.
#[pyfunction]
fn covariance_h(d: usize, n: usize, x: usize, y: usize) -> PyResult<f64> {
    let lat = lattice(d, n)?;
    if x >= lat.size() || y >= lat.size() {
        return Err(PyValueError::new_err("site index out of range"));
    }
    Ok(core_covariance_h(&lat, x, y))
}

/// The constant `L`, from expected hitting times started at `x` (or spectrally).
#[pyfunction]
#[pyo3(signature = (d, n, x = None))]
fn mass_constant_l(d: usize, n: usize, x: Option<usize>) -> PyResult<f64> {
    let lat = lattice(d, n)?;
    match x {
        Some(x) => mass_constant_l_from(&lat, x).map_err(py_err),
        None => Ok(mass_constant_l_spectral(&lat)),
    }
}

/// Expected hitting times `E_x[τ_z]` for every `x`.
#[pyfunction]
#[pyo3(signature = (d, n, z = 0))]
fn hitting_times(d: usize, n: usize, z: usize) -> PyResult<Vec<f64>> {
    Ok(hitting_times_to(&lattice(d, n)?, z).map_err(py_err)?.into_values())
}

/// `‖Ξ‖²` in `H^{−ε}` of the rescaled field built from `field`.
#[pyfunction]
#[pyo3(signature = (field, d, eps, cutoff = None))]
fn sobolev_norm<'py>(
    py: Python<'py>,
    field: Vec<f64>,
    d: usize,
    eps: f64,
    cutoff: Option<usize>,
) -> PyResult<Bound<'py, PyDict>> {
    let r = sobolev_norm_field(&grid(d, field)?, eps, cutoff).map_err(py_err)?;
    let out = PyDict::new(py);
    out.set_item("value", r.value)?;
    out.set_item("tail_bound", r.tail_bound)?;
    out.set_item("cutoff", r.cutoff)?;
    Ok(out)
}

fn kernel_tuple(v: KernelValue) -> (f64, f64, usize) {
    (v.value, v.error_bound, v.cutoff)
}

/// `(value, error_bound, cutoff)` of the kernel at `theta`.
/// `mode` is "lowdim", "mollified" or "limit".
#[pyfunction]
#[pyo3(signature = (theta, kappa = 0.0, cutoff = None, mode = None))]
fn kernel(theta: Vec<f64>, kappa: f64, cutoff: Option<usize>, mode: Option<&str>) -> PyResult<(f64, f64, usize)> {
    let mode = mode.unwrap_or(if kappa > 0.0 { "mollified" } else { "lowdim" });
    let mut q = KernelQuery::new(&theta, kappa).map_err(py_err)?;
    if let Some(m) = cutoff {
        q = q.with_cutoff(m);
    }
    let v = match mode {
        "lowdim" => kernel_lowdim(&q),
        "mollified" => kernel_mollified(&q),
        "limit" => kernel_limit(&theta, (kappa > 0.0).then_some(kappa)),
        other => return Err(PyValueError::new_err(format!("unknown kernel mode {other:?}"))),
    };
    v.map(kernel_tuple).map_err(py_err)
}

#[pyfunction]
#[pyo3(signature = (theta, shells = 1))]
fn singularity(theta: Vec<f64>, shells: usize) -> PyResult<f64> {
    periodized_singularity(&theta, shells).map_err(py_err)
}

/// `(mean, std_error)` of the m-th sample moment.
#[pyfunction]
fn moment(samples: Vec<f64>, m: u32) -> (f64, f64) {
    let e = moment_from_samples(&samples, m);
    (e.mean, e.std_error)
}

#[pymodule]
pub fn dsod(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NonConvergence", m.py().get_type::<NonConvergence>())?;
    m.add("InvalidMath", m.py().get_type::<InvalidMath>())?;
    m.add_class::<Torus>()?;
    m.add_class::<TestFunction>()?;
    m.add_function(wrap_pyfunction!(stabilize, m)?)?;
    m.add_function(wrap_pyfunction!(spectral_odometer, m)?)?;
    m.add_function(wrap_pyfunction!(init_configuration, m)?)?;
    m.add_function(wrap_pyfunction!(draw_weights, m)?)?;
    m.add_function(wrap_pyfunction!(w_field, m)?)?;
    m.add_function(wrap_pyfunction!(sample_chi, m)?)?;
    m.add_function(wrap_pyfunction!(sample_eta, m)?)?;
    m.add_function(wrap_pyfunction!(covariance_h, m)?)?;
    m.add_function(wrap_pyfunction!(mass_constant_l, m)?)?;
    m.add_function(wrap_pyfunction!(hitting_times, m)?)?;
    m.add_function(wrap_pyfunction!(sobolev_norm, m)?)?;
    m.add_function(wrap_pyfunction!(kernel, m)?)?;
    m.add_function(wrap_pyfunction!(singularity, m)?)?;
    m.add_function(wrap_pyfunction!(moment, m)?)?;
    Ok(())
}

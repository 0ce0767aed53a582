//! Python module `brwp`: potentials, grid densities, the proximal step,
//! particle samplers, diagnostics and the convergence bounds.

use brwp_core::density::{self, Bandwidth, InitSampling};
use brwp_core::experiments::{mode_balance, preset};
use brwp_core::samplers::{self, DiagEstimator};
use brwp_core::theory::{self, BoundInputs};
use brwp_core::{
    Axis, Error, Grid, KernelProx, Method, ParticleEnsemble, ProxBackend, ProxParams, RunRecord, SamplerConfig,
};
use pyo3::create_exception;
use pyo3::exceptions::{PyRuntimeError, PyValueError};
use pyo3::prelude::*;

create_exception!(brwp, NumericalError, PyRuntimeError, "Numerical breakdown inside a BRWP computation.");

fn to_py(e: Error) -> PyErr {
    if e.is_numerical() {
        NumericalError::new_err(e.to_string())
    } else {
        PyValueError::new_err(e.to_string())
    }
}

fn backend(name: &str) -> PyResult<ProxBackend> {
    match name {
        "quadrature" => Ok(ProxBackend::Quadrature),
        "laplace_denominator" => Ok(ProxBackend::LaplaceDenominator),
        "particle" => Ok(ProxBackend::Particle),
        other => Err(PyValueError::new_err(format!("unknown backend `{other}`"))),
    }
}

/// Potential `V` of a target `exp(-βV)`.
#[pyclass(name = "Potential", module = "brwp", from_py_object)]
#[derive(Clone)]
struct PyPotential {
    inner: brwp_core::Potential,
}

#[pymethods]
impl PyPotential {
    #[staticmethod]
    #[pyo3(signature = (alpha = 1.0, dim = 1))]
    fn quadratic(alpha: f64, dim: usize) -> PyResult<Self> {
        let inner = brwp_core::Potential::quadratic(alpha, dim).map_err(to_py)?;
        Ok(PyPotential { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (a, sigma = 1.0, beta = 1.0))]
    fn gaussian_mixture(a: Vec<f64>, sigma: f64, beta: f64) -> PyResult<Self> {
        let inner = brwp_core::Potential::gaussian_mixture(a, sigma, beta).map_err(to_py)?;
        Ok(PyPotential { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (dim = 1, beta = 1.0))]
    fn l1_l12(dim: usize, beta: f64) -> PyResult<Self> {
        let inner = brwp_core::Potential::l1_l12(dim, beta).map_err(to_py)?;
        Ok(PyPotential { inner })
    }

    #[staticmethod]
    #[pyo3(signature = (dim = 1, sigma = 1.0, b = 0.25, beta = 1.0))]
    fn gauss_laplace(dim: usize, sigma: f64, b: f64, beta: f64) -> PyResult<Self> {
        let inner = brwp_core::Potential::gauss_laplace(dim, sigma, b, beta).map_err(to_py)?;
        Ok(PyPotential { inner })
    }

    /// Catalog preset: `quadratic`, `gaussian_mixture`, `l1_l12` or `gauss_laplace`.
    #[staticmethod]
    #[pyo3(signature = (id, dim = 1, beta = 1.0))]
    fn preset(id: &str, dim: usize, beta: f64) -> PyResult<Self> {
        Ok(PyPotential {
            inner: preset(id, dim, beta).map_err(to_py)?,
        })
    }

    #[getter]
    fn name(&self) -> &'static str {
        self.inner.name()
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Strong convexity constant, if known.
    #[getter]
    fn alpha(&self) -> Option<f64> {
        self.inner.alpha()
    }

    fn value(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.value(&x))
    }

    fn gradient(&self, x: Vec<f64>) -> PyResult<Vec<f64>> {
        self.check(&x)?;
        Ok(self.inner.gradient_vec(&x))
    }

    fn laplacian(&self, x: Vec<f64>) -> PyResult<f64> {
        self.check(&x)?;
        Ok(self.inner.laplacian(&x))
    }

    fn __repr__(&self) -> String {
        format!("Potential({}, dim={})", self.inner.name(), self.inner.dim())
    }
}

impl PyPotential {
    fn check(&self, x: &[f64]) -> PyResult<()> {
        if x.len() != self.inner.dim() {
            return Err(PyValueError::new_err(format!(
                "point has {} coordinates, potential has dimension {}",
                x.len(),
                self.inner.dim()
            )));
        }
        Ok(())
    }
}

/// Density sampled on a uniform tensor grid.
#[pyclass(name = "GridDensity", module = "brwp", from_py_object)]
#[derive(Clone)]
struct PyGridDensity {
    inner: brwp_core::GridDensity,
}

fn line(lo: f64, hi: f64, n: usize, dim: usize) -> PyResult<Grid> {
    let axis = Axis::new(lo, hi, n).map_err(to_py)?;
    Grid::new(vec![axis; dim]).map_err(to_py)
}

#[pymethods]
impl PyGridDensity {
    /// `N(mean, var·I)` on `[lo, hi]^d` with `n` points per axis.
    #[staticmethod]
    #[pyo3(signature = (mean, var, lo = -12.0, hi = 12.0, n = 2401))]
    fn gaussian(mean: Vec<f64>, var: f64, lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        let g = line(lo, hi, n, mean.len())?;
        Ok(PyGridDensity {
            inner: brwp_core::GridDensity::gaussian(g, &mean, var).map_err(to_py)?,
        })
    }

    /// The normalized target `exp(-βV)/Z`.
    #[staticmethod]
    #[pyo3(signature = (potential, beta = 1.0, lo = -12.0, hi = 12.0, n = 2401))]
    fn target(potential: &PyPotential, beta: f64, lo: f64, hi: f64, n: usize) -> PyResult<Self> {
        let g = line(lo, hi, n, potential.inner.dim())?;
        Ok(PyGridDensity {
            inner: brwp_core::GridDensity::target(g, &potential.inner, beta).map_err(to_py)?,
        })
    }

    #[staticmethod]
    #[pyo3(signature = (values, lo, hi, dim = 1))]
    fn from_values(values: Vec<f64>, lo: f64, hi: f64, dim: usize) -> PyResult<Self> {
        let n = (values.len() as f64).powf(1.0 / dim as f64).round() as usize;
        let g = line(lo, hi, n, dim)?;
        Ok(PyGridDensity {
            inner: brwp_core::GridDensity::new(g, values).map_err(to_py)?,
        })
    }

    #[getter]
    fn dim(&self) -> usize {
        self.inner.dim()
    }

    /// Grid points, flattened row-major (`len(values)·dim` numbers).
    #[getter]
    fn points(&self) -> Vec<f64> {
        self.inner.grid.points()
    }

    #[getter]
    fn values(&self) -> Vec<f64> {
        self.inner.values.clone()
    }

    fn mass(&self) -> f64 {
        self.inner.mass()
    }

    fn mean(&self) -> Vec<f64> {
        self.inner.mean()
    }

    fn normalize(&self) -> PyResult<Self> {
        Ok(PyGridDensity {
            inner: self.inner.normalize().map_err(to_py)?,
        })
    }

    fn interpolate(&self, x: Vec<f64>) -> f64 {
        self.inner.interpolate(&x).0
    }

    #[pyo3(signature = (potential, beta = 1.0))]
    fn kl(&self, potential: &PyPotential, beta: f64) -> PyResult<f64> {
        density::kl_divergence(&self.inner, &potential.inner, beta).map_err(to_py)
    }

    #[pyo3(signature = (potential, beta = 1.0))]
    fn fisher(&self, potential: &PyPotential, beta: f64) -> PyResult<f64> {
        density::fisher_information(&self.inner, &potential.inner, beta).map_err(to_py)
    }

    #[pyo3(signature = (potential, beta = 1.0))]
    fn m0(&self, potential: &PyPotential, beta: f64) -> PyResult<f64> {
        density::fourth_moment_m0(&self.inner, &potential.inner, beta).map_err(to_py)
    }

    /// `∫|ρ − ρ*|`.
    #[pyo3(signature = (potential, beta = 1.0))]
    fn tv(&self, potential: &PyPotential, beta: f64) -> PyResult<f64> {
        density::tv_distance(&self.inner, &potential.inner, beta).map_err(to_py)
    }

    fn to_csv(&self) -> String {
        self.inner.to_csv()
    }

    fn __repr__(&self) -> String {
        format!("GridDensity(dim={}, points={})", self.inner.dim(), self.inner.values.len())
    }
}

/// One step of the kernel formula, `ρ ↦ Prox_T(ρ)`.
#[pyfunction]
#[pyo3(signature = (density, potential, t, beta = 1.0, backend = "quadrature"))]
fn prox_step(density: &PyGridDensity, potential: &PyPotential, t: f64, beta: f64, backend: &str) -> PyResult<PyGridDensity> {
    let p = ProxParams::new(t, beta).map_err(to_py)?;
    let kp = KernelProx::new(&density.inner.grid, &potential.inner, p, self::backend(backend)?).map_err(to_py)?;
    let out = kp.apply(&density.inner, false).map_err(to_py)?;
    Ok(PyGridDensity { inner: out.density })
}

/// Result of a sampler run.
#[pyclass(name = "RunRecord", module = "brwp", frozen)]
struct PyRunRecord {
    inner: RunRecord,
}

#[pymethods]
impl PyRunRecord {
    #[getter]
    fn method(&self) -> &'static str {
        self.inner.method.name()
    }

    #[getter]
    fn iters(&self) -> Vec<usize> {
        self.inner.rows.iter().map(|r| r.iter).collect()
    }

    #[getter]
    fn kl(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.kl).collect()
    }

    #[getter]
    fn kl_bound(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.kl_bound).collect()
    }

    #[getter]
    fn fisher(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.fisher).collect()
    }

    #[getter]
    fn w2(&self) -> Vec<f64> {
        self.inner.rows.iter().map(|r| r.w2).collect()
    }

    /// Final particles as a list of points.
    #[getter]
    fn particles(&self) -> Vec<Vec<f64>> {
        let e = &self.inner.final_ensemble;
        (0..e.len()).map(|i| e.point(i).to_vec()).collect()
    }

    #[getter]
    fn warnings(&self) -> Vec<String> {
        self.inner.warnings.clone()
    }

    /// Fraction of particles with positive first coordinate.
    fn mode_balance(&self) -> f64 {
        mode_balance(&self.inner)
    }

    fn __repr__(&self) -> String {
        format!("RunRecord({}, rows={})", self.inner.method.name(), self.inner.rows.len())
    }
}

/// Runs a particle sampler. `method` is one of `brwp_successive`,
/// `brwp_particle`, `brwp_kde`, `ula`, `explicit_flow`.
#[pyfunction]
#[pyo3(signature = (
    potential,
    method = "brwp_successive",
    h = 0.05,
    n_particles = 500,
    n_steps = 50,
    seed = 0,
    t = None,
    beta = 1.0,
    backend = None,
    init_mean = 0.0,
    init_var = 2.0,
    quantile_init = false,
    gaussian_fit = false,
    diag_every = 1,
))]
#[allow(clippy::too_many_arguments)]
fn sample(
    py: Python<'_>,
    potential: &PyPotential,
    method: &str,
    h: f64,
    n_particles: usize,
    n_steps: usize,
    seed: u64,
    t: Option<f64>,
    beta: f64,
    backend: Option<&str>,
    init_mean: f64,
    init_var: f64,
    quantile_init: bool,
    gaussian_fit: bool,
    diag_every: usize,
) -> PyResult<PyRunRecord> {
    let method = Method::parse(method).map_err(to_py)?;
    let backend = match backend {
        Some(b) => self::backend(b)?,
        None if method == Method::BrwpParticle => ProxBackend::Particle,
        None => ProxBackend::Quadrature,
    };
    let cfg = SamplerConfig {
        method,
        h,
        t,
        beta,
        n_particles,
        n_steps,
        seed,
        backend,
        init_mean,
        init_var,
        init_sampling: if quantile_init { InitSampling::Quantile } else { InitSampling::Random },
        diag_every,
        diag_estimator: if gaussian_fit { DiagEstimator::GaussianFit } else { DiagEstimator::Kde },
        ..SamplerConfig::default()
    };
    let v = potential.inner.clone();
    let rec = py.detach(move || samplers::run(&cfg, &v)).map_err(to_py)?;
    Ok(PyRunRecord { inner: rec })
}

/// Kernel density estimate of 1-D samples; Silverman bandwidth when `bandwidth` is None.
#[pyfunction]
#[pyo3(signature = (samples, bandwidth = None, lo = -12.0, hi = 12.0, n = 2401))]
fn kde(samples: Vec<f64>, bandwidth: Option<f64>, lo: f64, hi: f64, n: usize) -> PyResult<PyGridDensity> {
    let ens = ParticleEnsemble::new(samples, 1, 0).map_err(to_py)?;
    let bw = bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed);
    Ok(PyGridDensity {
        inner: density::kde(&ens, bw, &line(lo, hi, n, 1)?).map_err(to_py)?,
    })
}

/// `W₂` between two sorted 1-D samples of equal size.
#[pyfunction]
fn w2_1d(a: Vec<f64>, b: Vec<f64>) -> PyResult<f64> {
    density::w2_1d(&a, &b).map_err(to_py)
}

/// Closed-form KL bound after `k` steps.
#[pyfunction]
#[pyo3(signature = (k, alpha, h, s, kl0, m0, beta = 1.0))]
fn kl_k_bound(k: usize, alpha: f64, h: f64, s: f64, kl0: f64, m0: f64, beta: f64) -> PyResult<f64> {
    let inp = BoundInputs { alpha, beta, h, s, kl0, m0 };
    theory::kl_k_bound(k, &inp).map_err(to_py)
}

#[pyfunction]
fn sampling_complexity(delta: f64, alpha: f64) -> PyResult<u64> {
    theory::sampling_complexity(delta, alpha).map_err(to_py)
}

#[pyfunction]
fn optimal_stepsize(alpha: f64) -> f64 {
    theory::optimal_stepsize(alpha)
}

#[pyfunction]
fn max_stepsize(alpha: f64) -> f64 {
    theory::max_stepsize(alpha)
}

#[pyfunction]
fn pinsker_tv_bound(kl: f64) -> PyResult<f64> {
    theory::pinsker_tv_bound(kl).map_err(to_py)
}

#[pyfunction]
fn talagrand_w2_bound(kl: f64, alpha: f64) -> PyResult<f64> {
    theory::talagrand_w2_bound(kl, alpha).map_err(to_py)
}

#[pymodule]
fn brwp(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add("NumericalError", m.py().get_type::<NumericalError>())?;
    m.add_class::<PyPotential>()?;
    m.add_class::<PyGridDensity>()?;
    m.add_class::<PyRunRecord>()?;
    m.add_function(wrap_pyfunction!(prox_step, m)?)?;
    m.add_function(wrap_pyfunction!(sample, m)?)?;
    m.add_function(wrap_pyfunction!(kde, m)?)?;
    m.add_function(wrap_pyfunction!(w2_1d, m)?)?;
    m.add_function(wrap_pyfunction!(kl_k_bound, m)?)?;
    m.add_function(wrap_pyfunction!(sampling_complexity, m)?)?;
    m.add_function(wrap_pyfunction!(optimal_stepsize, m)?)?;
    m.add_function(wrap_pyfunction!(max_stepsize, m)?)?;
    m.add_function(wrap_pyfunction!(pinsker_tv_bound, m)?)?;
    m.add_function(wrap_pyfunction!(talagrand_w2_bound, m)?)?;
    Ok(())
}

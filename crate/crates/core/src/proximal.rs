//! Kernel formula of the regularized Wasserstein proximal operator.
//!
//! For a potential `V`, stepsize `T` and inverse temperature `β`,
//!
//! ```text
//! ρ_T(x) = ∫ K(x,y) ρ₀(y) dy,
//! K(x,y) = c·exp[-β/2 (V(x) + ‖x-y‖²/2T)] / D(y),
//! D(y)   = c·∫ exp[-β/2 (V(z) + ‖z-y‖²/2T)] dz,     c = (β/4πT)^{d/2}.
//! ```
//!
//! Both integrals are Gaussian convolutions with variance `2T/β`, so on a
//! tensor grid they reduce to banded separable sweeps.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{GridDensity, ParticleEnsemble};
use crate::error::{Error, Result};
use crate::grid::{Axis, AxisOperator, Grid, MAX_GRID_DIM};
use crate::potential::Potential;

/// Kernel entries with exponent below `-KERNEL_CUTOFF` are dropped.
const KERNEL_CUTOFF: f64 = 200.0;
/// Relative size of the denominator integrand allowed on the boundary.
const TAIL_TOL: f64 = 1e-10;
/// Allowed drift of the total mass in one step.
pub const MASS_TOL: f64 = 5e-3;
/// Smallest admissible Laplace correction factor `1 + (T/2)ΔV(ŝ)`.
const LAPLACE_GUARD: f64 = 0.1;
/// `ln(1e-300)`.
const LOG_ISOLATION: f64 = -690.775_527_898_213_7;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum ProxBackend {
    /// Denominator and numerator by tensor-grid quadrature.
    #[default]
    Quadrature,
    /// Closed-form Laplace denominator, quadrature numerator.
    LaplaceDenominator,
    /// Empirical initial density with the Laplace denominator.
    Particle,
}

impl ProxBackend {
    pub fn name(&self) -> &'static str {
        match self {
            ProxBackend::Quadrature => "quadrature",
            ProxBackend::LaplaceDenominator => "laplace_denominator",
            ProxBackend::Particle => "particle",
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProxParams {
    pub t: f64,
    pub beta: f64,
    /// Padding of the denominator grid beyond the density grid. `None`
    /// picks a width where the kernel has decayed below `1e-12`.
    pub z_margin: Option<f64>,
}

impl ProxParams {
    pub fn new(t: f64, beta: f64) -> Result<Self> {
        let p = ProxParams {
            t,
            beta,
            z_margin: None,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t > 0.0 && self.t.is_finite()) {
            return Err(Error::param(format!("T must be positive, got {}", self.t)));
        }
        if !(self.beta > 0.0 && self.beta.is_finite()) {
            return Err(Error::param(format!("beta must be positive, got {}", self.beta)));
        }
        if let Some(m) = self.z_margin {
            if !(m >= 0.0) {
                return Err(Error::param("z_margin must be nonnegative"));
            }
        }
        Ok(())
    }

    /// Variance of the heat kernel hidden in the formula.
    pub fn kernel_var(&self) -> f64 {
        2.0 * self.t / self.beta
    }

    fn margin(&self) -> f64 {
        self.z_margin
            .unwrap_or_else(|| (2.0 * self.kernel_var() * 12.0 * std::f64::consts::LN_10).sqrt())
    }

    fn log_prefactor(&self, d: usize) -> f64 {
        0.5 * d as f64 * (self.beta / (4.0 * std::f64::consts::PI * self.t)).ln()
    }
}

/// Laplace point `ŝ_y = y − T∇V(y)`.
fn laplace_point(y: &[f64], v: &Potential, t: f64) -> Vec<f64> {
    let g = v.gradient_vec(y);
    y.iter().zip(g).map(|(a, b)| a - t * b).collect()
}

/// Log of the closed-form denominator
/// `exp[-β/2 (V(ŝ) + ‖ŝ−y‖²/2T)] / (1 + (T/2)ΔV(ŝ))`.
pub fn log_denominator_laplace(y: &[f64], v: &Potential, p: &ProxParams) -> Result<f64> {
    let s = laplace_point(y, v, p.t);
    let corr = 1.0 + 0.5 * p.t * v.laplacian(&s);
    if !(corr > LAPLACE_GUARD) {
        return Err(Error::StepsizeTooLarge(format!(
            "Laplace correction 1 + (T/2)ΔV = {corr:.4} at y = {y:?} (needs > {LAPLACE_GUARD})"
        )));
    }
    let r2: f64 = s.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
    Ok(-0.5 * p.beta * (v.value(&s) + r2 / (2.0 * p.t)) - corr.ln())
}

pub fn denominator_laplace(y: &[f64], v: &Potential, p: &ProxParams) -> Result<f64> {
    p.validate()?;
    Ok(log_denominator_laplace(y, v, p)?.exp())
}

/// Log of the scaled denominator by trapezoid quadrature on a grid centred
/// at the Laplace point.
pub fn log_denominator_exact(y: &[f64], v: &Potential, p: &ProxParams) -> Result<f64> {
    p.validate()?;
    let d = y.len();
    if d == 0 || d > MAX_GRID_DIM {
        return Err(Error::param(format!("quadrature denominator supports d ≤ {MAX_GRID_DIM}")));
    }
    let s = laplace_point(y, v, p.t);
    let sd = p.kernel_var().sqrt();
    let n = [0, 4001, 401, 121][d];
    let axes = (0..d)
        .map(|k| {
            let r = 12.0 * sd + (s[k] - y[k]).abs();
            Axis::new(s[k] - r, s[k] + r, n)
        })
        .collect::<Result<Vec<_>>>()?;
    let grid = Grid::new(axes)?;
    let pts = grid.points();
    let log_int: Vec<f64> = pts
        .par_chunks(d)
        .map(|z| {
            let r2: f64 = z.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
            -0.5 * p.beta * (v.value(z) + r2 / (2.0 * p.t))
        })
        .collect();
    let top = log_int.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let mut idx = [0usize; MAX_GRID_DIM];
    let shape = grid.shape();
    let mut edge = f64::NEG_INFINITY;
    for (flat, l) in log_int.iter().enumerate() {
        grid.unravel(flat, &mut idx[..d]);
        if (0..d).any(|k| idx[k] == 0 || idx[k] + 1 == shape[k]) {
            edge = edge.max(*l);
        }
    }
    if edge - top > TAIL_TOL.ln() {
        return Err(Error::Truncation(format!(
            "denominator integrand at the boundary is {:.2e} of its peak",
            (edge - top).exp()
        )));
    }
    let vals: Vec<f64> = log_int.iter().map(|l| (l - top).exp()).collect();
    Ok(top + grid.integrate(&vals).ln() + p.log_prefactor(d))
}

pub fn denominator_exact(y: &[f64], v: &Potential, p: &ProxParams) -> Result<f64> {
    Ok(log_denominator_exact(y, v, p)?.exp())
}

/// Output of one proximal step on a grid.
#[derive(Clone, Debug)]
pub struct ProxOutput {
    /// Renormalized `ρ_T`.
    pub density: GridDensity,
    /// Mass of `ρ_T` before renormalization, relative to the input mass.
    pub mass: f64,
    /// `∇ρ_T`, component-major (`d` blocks of grid length), renormalized
    /// consistently with `density`. Present when requested.
    pub gradient: Option<Vec<f64>>,
    /// Kernel conditional mean `E[y | x]`, component-major.
    pub cond_mean: Option<Vec<f64>>,
    /// Non-fatal diagnostics.
    pub warnings: Vec<String>,
}

/// Precomputed kernel for a fixed grid, potential and stepsize.
#[derive(Clone, Debug)]
pub struct KernelProx {
    grid: Grid,
    potential: Potential,
    params: ProxParams,
    backend: ProxBackend,
    /// `β(V(x) − V_ref)/2` on the grid.
    half_bv: Vec<f64>,
    v_ref: f64,
    /// `ln D(y) + βV_ref/2` on the grid, with the prefactor folded into the
    /// convolution weights.
    log_d_shift: Vec<f64>,
    ops: Vec<AxisOperator>,
    warnings: Vec<String>,
}

impl KernelProx {
    pub fn new(grid: &Grid, potential: &Potential, params: ProxParams, backend: ProxBackend) -> Result<Self> {
        params.validate()?;
        if potential.dim() != grid.dim() {
            return Err(Error::param("potential dimension does not match the grid"));
        }
        let d = grid.dim();
        let var = params.kernel_var();
        let beta = params.beta;
        let pts = grid.points();
        let vx: Vec<f64> = pts.par_chunks(d).map(|x| potential.value(x)).collect();
        let mut warnings = Vec::new();

        let (v_ref, log_d_shift) = match backend {
            ProxBackend::Quadrature => {
                let zaxes: Vec<Axis> = grid.axes().iter().map(|a| a.extended(params.margin())).collect();
                let zgrid = Grid::new(zaxes.clone())?;
                let zpts = zgrid.points();
                let vz: Vec<f64> = zpts.par_chunks(d).map(|z| potential.value(z)).collect();
                let v_ref = vz.iter().cloned().fold(f64::INFINITY, f64::min);
                check_denominator_tails(grid, &zgrid, &vz, potential, &params)?;
                let mut field: Vec<f64> = vz.iter().map(|v| (-0.5 * beta * (v - v_ref)).exp()).collect();
                let mut shape = zgrid.shape();
                for k in 0..d {
                    let op = AxisOperator::gaussian(&grid.axes()[k], &zaxes[k], var, KERNEL_CUTOFF);
                    field = op.apply(&field, &shape, k);
                    shape[k] = grid.axes()[k].n;
                }
                if let Some(bad) = field.iter().position(|v| !(*v > 0.0)) {
                    return Err(Error::Truncation(format!(
                        "denominator underflowed at grid node {bad}; shrink the grid"
                    )));
                }
                (v_ref, field.iter().map(|v| v.ln()).collect())
            }
            ProxBackend::LaplaceDenominator => {
                let v_ref = vx.iter().cloned().fold(f64::INFINITY, f64::min);
                let logs = pts
                    .par_chunks(d)
                    .map(|y| log_denominator_laplace(y, potential, &params))
                    .collect::<Result<Vec<f64>>>()?;
                let worst = pts
                    .chunks(d)
                    .map(|y| params.t * potential.laplacian(&laplace_point(y, potential, params.t)))
                    .fold(f64::NEG_INFINITY, f64::max);
                if worst > 0.5 {
                    warnings.push(format!("T·ΔV reaches {worst:.3} on the grid; Laplace denominator is inaccurate"));
                }
                (v_ref, logs.iter().map(|l| l + 0.5 * beta * v_ref).collect())
            }
            ProxBackend::Particle => {
                return Err(Error::param(
                    "the particle backend acts on ensembles; use prox_particle_score",
                ))
            }
        };
        let half_bv = vx.iter().map(|v| 0.5 * beta * (v - v_ref)).collect();
        let ops = grid
            .axes()
            .iter()
            .map(|a| AxisOperator::gaussian(a, a, var, KERNEL_CUTOFF))
            .collect();
        Ok(KernelProx {
            grid: grid.clone(),
            potential: potential.clone(),
            params,
            backend,
            half_bv,
            v_ref,
            log_d_shift,
            ops,
            warnings,
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.grid
    }

    pub fn params(&self) -> &ProxParams {
        &self.params
    }

    pub fn backend(&self) -> ProxBackend {
        self.backend
    }

    /// `ln D(y)` on the grid.
    pub fn log_denominator(&self) -> Vec<f64> {
        let shift = 0.5 * self.params.beta * self.v_ref;
        self.log_d_shift.iter().map(|l| l - shift).collect()
    }

    fn convolve(&self, f: Vec<f64>) -> Vec<f64> {
        let shape = self.grid.shape();
        let mut out = f;
        for (k, op) in self.ops.iter().enumerate() {
            out = op.apply(&out, &shape, k);
        }
        out
    }

    /// One proximal step. With `with_gradient`, also returns `∇ρ_T` and the
    /// kernel conditional mean.
    pub fn apply(&self, rho0: &GridDensity, with_gradient: bool) -> Result<ProxOutput> {
        if rho0.grid != self.grid {
            return Err(Error::param("density grid does not match the kernel grid"));
        }
        let mass_in = rho0.mass();
        if !(mass_in.is_finite() && mass_in > 0.0) {
            return Err(Error::DegenerateDensity(format!("input mass {mass_in}")));
        }
        let r: Vec<f64> = rho0
            .values
            .iter()
            .zip(&self.log_d_shift)
            .map(|(v, ld)| if *v > 0.0 { (v.ln() - ld).exp() } else { 0.0 })
            .collect();
        let d = self.grid.dim();
        let pts = if with_gradient { self.grid.points() } else { Vec::new() };
        let moments: Vec<Vec<f64>> = if with_gradient {
            (0..d)
                .map(|k| {
                    let f = r.iter().enumerate().map(|(i, v)| v * pts[i * d + k]).collect();
                    self.convolve(f)
                })
                .collect()
        } else {
            Vec::new()
        };
        let base = self.convolve(r);
        let weight: Vec<f64> = self.half_bv.iter().map(|h| (-h).exp()).collect();
        let rho_t: Vec<f64> = base.iter().zip(&weight).map(|(b, w)| b * w).collect();
        let raw = GridDensity::new(self.grid.clone(), rho_t)?;
        let mass = raw.mass() / mass_in;
        if (mass - 1.0).abs() > MASS_TOL {
            return Err(Error::MassLoss {
                mass,
                tolerance: MASS_TOL,
            });
        }
        let total = raw.mass();
        let density = GridDensity {
            values: raw.values.iter().map(|v| v / total * mass_in).collect(),
            ..raw
        };
        let mut warnings = self.warnings.clone();
        let (gradient, cond_mean) = if with_gradient {
            let n = self.grid.len();
            let beta = self.params.beta;
            let t = self.params.t;
            let mut cm = vec![0.0; d * n];
            let mut fallback = 0usize;
            for i in 0..n {
                for k in 0..d {
                    cm[k * n + i] = if base[i] > 0.0 {
                        moments[k][i] / base[i]
                    } else {
                        fallback += 1;
                        pts[i * d + k]
                    };
                }
            }
            if fallback > 0 {
                warnings.push(format!("{} nodes far from the data use a drift-only score", fallback / d));
            }
            let mut grad = vec![0.0; d * n];
            let mut g = [0.0; MAX_GRID_DIM];
            for i in 0..n {
                self.potential.gradient(&pts[i * d..(i + 1) * d], &mut g[..d]);
                for k in 0..d {
                    let s = -0.5 * beta * g[k] - beta / (2.0 * t) * (pts[i * d + k] - cm[k * n + i]);
                    grad[k * n + i] = s * density.values[i];
                }
            }
            (Some(grad), Some(cm))
        } else {
            (None, None)
        };
        Ok(ProxOutput {
            density,
            mass,
            gradient,
            cond_mean,
            warnings,
        })
    }

    /// Score `∇ log ρ_T` at arbitrary points, using the conditional mean
    /// interpolated from `out` and the exact drift term. Returns the number
    /// of points that had to be clamped into the grid.
    pub fn score_at(&self, out: &ProxOutput, points: &[f64], dim: usize, scores: &mut [f64]) -> Result<usize> {
        let cm = out
            .cond_mean
            .as_ref()
            .ok_or_else(|| Error::param("proximal output was computed without gradient"))?;
        let d = self.grid.dim();
        if dim != d {
            return Err(Error::param("score grids must match the particle dimension"));
        }
        let n = self.grid.len();
        let beta = self.params.beta;
        let t = self.params.t;
        let clamped: usize = scores
            .par_chunks_mut(d)
            .zip(points.par_chunks(d))
            .map(|(s, x)| {
                let mut was_clamped = false;
                self.potential.gradient(x, s);
                for k in 0..d {
                    let (m, c) = self.grid.interpolate(&cm[k * n..(k + 1) * n], x);
                    was_clamped |= c;
                    s[k] = -0.5 * beta * s[k] - beta / (2.0 * t) * (x[k] - m);
                }
                usize::from(was_clamped)
            })
            .sum();
        Ok(clamped)
    }
}

/// Samples pairs (boundary node of the denominator grid, outer node) and
/// checks that the integrand at the boundary is negligible.
fn check_denominator_tails(
    ygrid: &Grid,
    zgrid: &Grid,
    vz: &[f64],
    v: &Potential,
    p: &ProxParams,
) -> Result<()> {
    let d = ygrid.dim();
    let per_axis = [0, 400, 64, 16][d];
    let sample = |g: &Grid| -> Vec<usize> {
        let shape = g.shape();
        let strides: Vec<usize> = shape.iter().map(|n| (n / per_axis).max(1)).collect();
        let mut idx = [0usize; MAX_GRID_DIM];
        (0..g.len())
            .filter(|&f| {
                g.unravel(f, &mut idx[..d]);
                (0..d).all(|k| idx[k] % strides[k] == 0 || idx[k] + 1 == shape[k])
            })
            .collect()
    };
    let zshape = zgrid.shape();
    let mut idx = [0usize; MAX_GRID_DIM];
    let boundary: Vec<usize> = sample(zgrid)
        .into_iter()
        .filter(|&f| {
            zgrid.unravel(f, &mut idx[..d]);
            (0..d).any(|k| idx[k] == 0 || idx[k] + 1 == zshape[k])
        })
        .collect();
    let zb: Vec<(Vec<f64>, f64)> = boundary
        .iter()
        .map(|&f| {
            let mut z = vec![0.0; d];
            zgrid.point(f, &mut z);
            (z, vz[f])
        })
        .collect();
    let log_tol = TAIL_TOL.ln();
    let worst = sample(ygrid)
        .par_iter()
        .map(|&f| {
            let mut y = vec![0.0; d];
            ygrid.point(f, &mut y);
            let s = laplace_point(&y, v, p.t);
            let li = |z: &[f64], vzv: f64| {
                let r2: f64 = z.iter().zip(&y).map(|(a, b)| (a - b) * (a - b)).sum();
                -0.5 * p.beta * (vzv + r2 / (2.0 * p.t))
            };
            let peak = li(&y, v.value(&y)).max(li(&s, v.value(&s)));
            zb.iter()
                .map(|(z, vzv)| li(z, *vzv) - peak)
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .reduce(|| f64::NEG_INFINITY, f64::max);
    if worst > log_tol {
        return Err(Error::Truncation(format!(
            "denominator integrand reaches {:.2e} of its peak on the padded boundary",
            worst.exp()
        )));
    }
    Ok(())
}

/// One proximal step on the grid of `rho0`.
pub fn prox_step(rho0: &GridDensity, v: &Potential, p: &ProxParams, backend: ProxBackend) -> Result<ProxOutput> {
    KernelProx::new(&rho0.grid, v, *p, backend)?.apply(rho0, false)
}

/// `∇ρ_T` on the grid of `rho0`, component-major.
pub fn prox_gradient(rho0: &GridDensity, v: &Potential, p: &ProxParams, backend: ProxBackend) -> Result<Vec<f64>> {
    let out = KernelProx::new(&rho0.grid, v, *p, backend)?.apply(rho0, true)?;
    Ok(out.gradient.expect("requested gradient"))
}

/// Scores `∇ log ρ_T` at every particle, where `ρ_T` is the proximal image
/// of the ensemble's empirical measure and the denominator is the Laplace
/// closed form.
pub fn prox_particle_score(ens: &ParticleEnsemble, v: &Potential, p: &ProxParams) -> Result<Vec<f64>> {
    p.validate()?;
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateDensity("particle scores need at least 2 particles".into()));
    }
    let d = ens.dim;
    if v.dim() != d {
        return Err(Error::param("potential dimension does not match the particles"));
    }
    let log_d = (0..n)
        .into_par_iter()
        .map(|j| log_denominator_laplace(ens.point(j), v, p))
        .collect::<Result<Vec<f64>>>()?;
    let beta = p.beta;
    let t = p.t;
    let scale = beta / (4.0 * t);
    let log_pref = p.log_prefactor(d) - (n as f64).ln();
    let mut scores = vec![0.0; n * d];
    let isolated: Option<(usize, f64)> = scores
        .par_chunks_mut(d)
        .enumerate()
        .map(|(i, s)| {
            let x = ens.point(i);
            let mut top = f64::NEG_INFINITY;
            let mut logw = vec![0.0; n];
            for j in 0..n {
                let y = ens.point(j);
                let r2: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                logw[j] = -scale * r2 - log_d[j];
                top = top.max(logw[j]);
            }
            let mut z = 0.0;
            let mut mean = vec![0.0; d];
            for j in 0..n {
                let w = (logw[j] - top).exp();
                z += w;
                for (mk, yk) in mean.iter_mut().zip(ens.point(j)) {
                    *mk += w * yk;
                }
            }
            let log_rho = -0.5 * beta * v.value(x) + log_pref + top + z.ln();
            v.gradient(x, s);
            for k in 0..d {
                s[k] = -0.5 * beta * s[k] - beta / (2.0 * t) * (x[k] - mean[k] / z);
            }
            (log_rho < LOG_ISOLATION).then_some((i, log_rho))
        })
        .reduce(|| None, |a, b| a.or(b));
    if let Some((index, log_density)) = isolated {
        return Err(Error::IsolatedParticle { index, log_density });
    }
    Ok(scores)
}

/// `ρ₀[1 − βT∇(V−V₀)·∇V₀ + TΔ(V−V₀)]` with `V₀ = −β⁻¹ log ρ₀`.
pub fn first_order_expansion(rho0: &GridDensity, v: &Potential, beta: f64, t: f64) -> Result<GridDensity> {
    if !(beta > 0.0) || !(t >= 0.0) {
        return Err(Error::param("beta must be positive and T nonnegative"));
    }
    if let Some(i) = rho0.values.iter().position(|x| !(*x > 0.0)) {
        return Err(Error::DegenerateDensity(format!("density vanishes at node {i}")));
    }
    if t == 0.0 {
        return Ok(rho0.clone());
    }
    let grid = &rho0.grid;
    let d = grid.dim();
    let v0: Vec<f64> = rho0.values.iter().map(|r| -r.ln() / beta).collect();
    let pts = grid.points();
    let mut bracket: Vec<f64> = pts.chunks(d).map(|x| 1.0 + t * v.laplacian(x)).collect();
    let grads: Vec<f64> = pts.chunks(d).flat_map(|x| v.gradient_vec(x)).collect();
    for k in 0..d {
        let dv0 = grid.partial4(&v0, k);
        let d2v0 = grid.second_partial4(&v0, k);
        for i in 0..bracket.len() {
            let dv = grads[i * d + k];
            bracket[i] += -beta * t * (dv - dv0[i]) * dv0[i] - t * d2v0[i];
        }
    }
    let values = rho0.values.iter().zip(&bracket).map(|(r, b)| r * b).collect();
    Ok(GridDensity {
        grid: grid.clone(),
        values,
        log_floor: rho0.log_floor,
    })
}

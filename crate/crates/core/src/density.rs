//! Grid densities, particle ensembles and the diagnostic functionals.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};

use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, MAX_GRID_DIM};
use crate::potential::Potential;

pub const DEFAULT_LOG_FLOOR: f64 = 1e-300;

/// Largest tail mass of the target allowed outside a diagnostics grid.
pub const TRUNCATION_TOL: f64 = 1e-8;

/// A nonnegative function on a tensor grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GridDensity {
    pub grid: Grid,
    pub values: Vec<f64>,
    pub log_floor: f64,
}

impl GridDensity {
    pub fn new(grid: Grid, values: Vec<f64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::param(format!(
                "{} values for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        if let Some(v) = values.iter().find(|v| !(v.is_finite() && **v >= 0.0)) {
            return Err(Error::DegenerateDensity(format!("entry {v} is negative or not finite")));
        }
        Ok(GridDensity {
            grid,
            values,
            log_floor: DEFAULT_LOG_FLOOR,
        })
    }

    pub fn from_fn(grid: Grid, f: impl Fn(&[f64]) -> f64 + Sync) -> Result<Self> {
        let d = grid.dim();
        let values = grid.points().par_chunks(d).map(&f).collect();
        GridDensity::new(grid, values)
    }

    /// Isotropic Gaussian `N(mean, var·I)` sampled on the grid (not renormalized).
    pub fn gaussian(grid: Grid, mean: &[f64], var: f64) -> Result<Self> {
        if !(var > 0.0) {
            return Err(Error::param("gaussian variance must be positive"));
        }
        if mean.len() != grid.dim() {
            return Err(Error::param("mean dimension does not match the grid"));
        }
        let d = grid.dim() as f64;
        let norm = (2.0 * std::f64::consts::PI * var).powf(-0.5 * d);
        let mean = mean.to_vec();
        GridDensity::from_fn(grid, move |x| {
            let r2: f64 = x.iter().zip(&mean).map(|(a, b)| (a - b) * (a - b)).sum();
            norm * (-0.5 * r2 / var).exp()
        })
    }

    /// The normalized target `exp(-βV)/Z` with `Z` taken on this grid.
    pub fn target(grid: Grid, target: &Potential, beta: f64) -> Result<Self> {
        let log_rho = target_log_density(&grid, target, beta)?;
        let values = log_rho.iter().map(|l| l.exp()).collect();
        GridDensity::new(grid, values)
    }

    pub fn dim(&self) -> usize {
        self.grid.dim()
    }

    pub fn mass(&self) -> f64 {
        self.grid.integrate(&self.values)
    }

    pub fn normalize(&self) -> Result<Self> {
        let m = self.mass();
        if !(m.is_finite() && m > 0.0) {
            return Err(Error::DegenerateDensity(format!("mass {m} cannot be normalized")));
        }
        Ok(GridDensity {
            grid: self.grid.clone(),
            values: self.values.iter().map(|v| v / m).collect(),
            log_floor: self.log_floor,
        })
    }

    pub fn log_values(&self) -> Vec<f64> {
        let floor = self.log_floor;
        self.values.iter().map(|v| v.max(floor).ln()).collect()
    }

    pub fn interpolate(&self, x: &[f64]) -> (f64, bool) {
        self.grid.interpolate(&self.values, x)
    }

    pub fn mean(&self) -> Vec<f64> {
        let d = self.dim();
        let pts = self.grid.points();
        let m = self.mass();
        (0..d)
            .map(|k| {
                let f: Vec<f64> = self.values.iter().enumerate().map(|(i, v)| v * pts[i * d + k]).collect();
                self.grid.integrate(&f) / m
            })
            .collect()
    }

    /// Variance of the first coordinate.
    pub fn variance_first(&self) -> f64 {
        let d = self.dim();
        let pts = self.grid.points();
        let m = self.mass();
        let mu = self.mean()[0];
        let f: Vec<f64> = self
            .values
            .iter()
            .enumerate()
            .map(|(i, v)| v * (pts[i * d] - mu).powi(2))
            .collect();
        self.grid.integrate(&f) / m
    }

    /// Writes the density as CSV: one header row of axis metadata, then
    /// `x_1,…,x_d,value` rows.
    pub fn to_csv(&self) -> String {
        let d = self.dim();
        let mut s = String::from("# axes");
        for a in self.grid.axes() {
            s.push_str(&format!(" [{},{},{}]", a.lo, a.hi, a.n));
        }
        s.push('\n');
        for k in 0..d {
            s.push_str(&format!("x{},", k + 1));
        }
        s.push_str("value\n");
        let pts = self.grid.points();
        for (i, v) in self.values.iter().enumerate() {
            for k in 0..d {
                s.push_str(&format!("{:?},", pts[i * d + k]));
            }
            s.push_str(&format!("{v:?}\n"));
        }
        s
    }
}

/// `log(exp(-βV)/Z)` on the grid, after checking that the grid captures
/// all but [`TRUNCATION_TOL`] of the target mass.
pub fn target_log_density(grid: &Grid, target: &Potential, beta: f64) -> Result<Vec<f64>> {
    if !(beta > 0.0) {
        return Err(Error::param("beta must be positive"));
    }
    if target.dim() != grid.dim() {
        return Err(Error::param(format!(
            "target has dimension {} but the grid has {}",
            target.dim(),
            grid.dim()
        )));
    }
    if !target.is_normalizable() && !matches!(target, Potential::Tabulated { .. }) {
        return Err(Error::Truncation(format!("{} target is not normalizable", target.name())));
    }
    let d = grid.dim();
    let pts = grid.points();
    let neg: Vec<f64> = pts.par_chunks(d).map(|x| -beta * target.value(x)).collect();
    let top = neg.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let shifted: Vec<f64> = neg.iter().map(|l| (l - top).exp()).collect();
    let z = grid.integrate(&shifted);
    let log_z = top + z.ln();
    let log_rho: Vec<f64> = neg.iter().map(|l| l - log_z).collect();
    let tail = tail_mass(grid, target, beta, &log_rho);
    if !(tail < TRUNCATION_TOL) {
        return Err(Error::Truncation(format!(
            "estimated target mass outside the grid is {tail:.3e} (limit {TRUNCATION_TOL:e})"
        )));
    }
    Ok(log_rho)
}

/// Mass beyond each boundary face, estimated as `∫_face ρ*/|∂ₙ log ρ*|`.
fn tail_mass(grid: &Grid, target: &Potential, beta: f64, log_rho: &[f64]) -> f64 {
    let d = grid.dim();
    let shape = grid.shape();
    let mut idx = [0usize; MAX_GRID_DIM];
    let mut x = [0.0; MAX_GRID_DIM];
    let mut g = [0.0; MAX_GRID_DIM];
    let mut tail = 0.0;
    for flat in 0..grid.len() {
        grid.unravel(flat, &mut idx[..d]);
        let on_face = (0..d).any(|k| idx[k] == 0 || idx[k] + 1 == shape[k]);
        if !on_face {
            continue;
        }
        grid.point(flat, &mut x[..d]);
        target.gradient(&x[..d], &mut g[..d]);
        let rho = log_rho[flat].exp();
        for k in 0..d {
            let outward = if idx[k] == 0 {
                -1.0
            } else if idx[k] + 1 == shape[k] {
                1.0
            } else {
                continue;
            };
            let face_w: f64 = (0..d)
                .filter(|&j| j != k)
                .map(|j| grid.axes()[j].trapezoid_weight(idx[j]))
                .product();
            let decay = beta * g[k] * outward;
            tail += rho * face_w / decay.max(1e-12);
        }
    }
    tail
}

fn check_target_grid(g: &GridDensity, target: &Potential, beta: f64) -> Result<Vec<f64>> {
    target_log_density(&g.grid, target, beta)
}

/// `∫ g log(g/ρ*)` by the trapezoid rule.
pub fn kl_divergence(g: &GridDensity, target: &Potential, beta: f64) -> Result<f64> {
    let log_t = check_target_grid(g, target, beta)?;
    let f: Vec<f64> = g
        .values
        .iter()
        .zip(&log_t)
        .map(|(v, lt)| if *v > 0.0 { v * (v.max(g.log_floor).ln() - lt) } else { 0.0 })
        .collect();
    Ok(g.grid.integrate(&f))
}

/// Squared norm of `∇ log(g/ρ*)` at every node.
fn relative_score_sq(g: &GridDensity, log_t: &[f64]) -> Vec<f64> {
    let r: Vec<f64> = g.log_values().iter().zip(log_t).map(|(a, b)| a - b).collect();
    let mut sq = vec![0.0; r.len()];
    for k in 0..g.dim() {
        let dk = g.grid.partial(&r, k);
        for (s, v) in sq.iter_mut().zip(dk) {
            *s += v * v;
        }
    }
    sq
}

/// Relative Fisher information `∫ ‖∇log(g/ρ*)‖² g`.
pub fn fisher_information(g: &GridDensity, target: &Potential, beta: f64) -> Result<f64> {
    let log_t = check_target_grid(g, target, beta)?;
    let sq = relative_score_sq(g, &log_t);
    let f: Vec<f64> = sq.iter().zip(&g.values).map(|(s, v)| s * v).collect();
    Ok(g.grid.integrate(&f))
}

/// `β⁻² ∫ ‖∇log(g/ρ*)‖⁴ g`.
pub fn fourth_moment_m0(g: &GridDensity, target: &Potential, beta: f64) -> Result<f64> {
    let log_t = check_target_grid(g, target, beta)?;
    let sq = relative_score_sq(g, &log_t);
    let f: Vec<f64> = sq.iter().zip(&g.values).map(|(s, v)| s * s * v).collect();
    Ok(g.grid.integrate(&f) / (beta * beta))
}

/// `∫ |g − ρ*|`, taking values in `[0, 2]`.
pub fn tv_distance(g: &GridDensity, target: &Potential, beta: f64) -> Result<f64> {
    let log_t = check_target_grid(g, target, beta)?;
    let f: Vec<f64> = g.values.iter().zip(&log_t).map(|(v, lt)| (v - lt.exp()).abs()).collect();
    Ok(g.grid.integrate(&f))
}

/// 1-D Wasserstein-2 distance between two sorted samples of equal size.
pub fn w2_1d(a: &[f64], b: &[f64]) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::param(format!("sample sizes differ: {} vs {}", a.len(), b.len())));
    }
    if a.is_empty() {
        return Err(Error::param("empty samples"));
    }
    for s in [a, b] {
        if s.windows(2).any(|w| !(w[0] <= w[1])) {
            return Err(Error::param("samples must be sorted ascending"));
        }
    }
    let ss: f64 = a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((ss / a.len() as f64).sqrt())
}

/// Quantile function of a 1-D grid density, evaluated at the levels `u`.
fn grid_quantiles(g: &GridDensity, u: &[f64]) -> Vec<f64> {
    let axis = &g.grid.axes()[0];
    let dx = axis.spacing();
    let mut cdf = vec![0.0; axis.n];
    for i in 1..axis.n {
        cdf[i] = cdf[i - 1] + 0.5 * dx * (g.values[i - 1] + g.values[i]);
    }
    let total = cdf[axis.n - 1];
    let mut j = 0;
    u.iter()
        .map(|&q| {
            let target = q * total;
            while j + 1 < axis.n && cdf[j + 1] < target {
                j += 1;
            }
            if j + 1 >= axis.n {
                return axis.hi;
            }
            let span = cdf[j + 1] - cdf[j];
            let f = if span > 0.0 { (target - cdf[j]) / span } else { 0.0 };
            axis.point(j) + f.clamp(0.0, 1.0) * dx
        })
        .collect()
}

const W2_LEVELS: usize = 4000;

/// 1-D Wasserstein-2 distance from a grid density to the target by the
/// quantile coupling.
pub fn w2_grid(g: &GridDensity, target: &Potential, beta: f64) -> Result<f64> {
    if g.dim() != 1 {
        return Err(Error::param("grid W2 is only defined for 1-D densities"));
    }
    let t = GridDensity::target(g.grid.clone(), target, beta)?;
    let u: Vec<f64> = (0..W2_LEVELS).map(|i| (i as f64 + 0.5) / W2_LEVELS as f64).collect();
    w2_1d(&grid_quantiles(g, &u), &grid_quantiles(&t, &u))
}

/// 1-D Wasserstein-2 distance from samples to the target, whose quantiles
/// are read off a grid.
pub fn w2_samples(samples: &[f64], target: &Potential, beta: f64, grid: &Grid) -> Result<f64> {
    let mut s = samples.to_vec();
    s.sort_by(f64::total_cmp);
    let t = GridDensity::target(grid.clone(), target, beta)?;
    let n = s.len();
    let u: Vec<f64> = (0..n).map(|i| (i as f64 + 0.5) / n as f64).collect();
    w2_1d(&s, &grid_quantiles(&t, &u))
}

/// `∇·(g∇V) + β⁻¹Δg` with fourth-order central differences.
pub fn fp_rhs(g: &GridDensity, target: &Potential, beta: f64) -> Result<Vec<f64>> {
    if g.grid.axes().iter().any(|a| a.n < 5) {
        return Err(Error::param("Fokker-Planck stencils need at least 5 nodes per axis"));
    }
    if target.dim() != g.dim() {
        return Err(Error::param("target dimension does not match the grid"));
    }
    let d = g.dim();
    let pts = g.grid.points();
    let grads: Vec<f64> = pts
        .par_chunks(d)
        .flat_map_iter(|x| target.gradient_vec(x))
        .collect();
    let mut rhs = vec![0.0; g.values.len()];
    for k in 0..d {
        let flux: Vec<f64> = g.values.iter().enumerate().map(|(i, v)| v * grads[i * d + k]).collect();
        let div = g.grid.partial4(&flux, k);
        let lap = g.grid.second_partial4(&g.values, k);
        for i in 0..rhs.len() {
            rhs[i] += div[i] + lap[i] / beta;
        }
    }
    Ok(rhs)
}

/// KL between Gaussians fitted by moments: `N(m, v)` against `N(0, s2)`.
pub fn gaussian_fit_kl(mean: f64, var: f64, target_var: f64) -> f64 {
    let r = var / target_var;
    0.5 * (r + mean * mean / target_var - 1.0 - r.ln())
}

/// Sample mean and unbiased variance.
pub fn mean_var(xs: &[f64]) -> (f64, f64) {
    let n = xs.len() as f64;
    let m = xs.iter().sum::<f64>() / n;
    let v = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1.0).max(1.0);
    (m, v)
}

/// `N` points in `ℝᵈ` stored row-major.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ParticleEnsemble {
    pub points: Vec<f64>,
    pub dim: usize,
    pub step_index: usize,
    pub seed: u64,
}

/// How initial particles are drawn from a Gaussian law.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InitSampling {
    /// Independent draws.
    #[default]
    Random,
    /// Stratified normal quantiles, independently permuted per axis.
    Quantile,
}

impl ParticleEnsemble {
    pub fn new(points: Vec<f64>, dim: usize, seed: u64) -> Result<Self> {
        if dim == 0 || points.is_empty() || !points.len().is_multiple_of(dim) {
            return Err(Error::param(format!(
                "{} coordinates do not form points of dimension {dim}",
                points.len()
            )));
        }
        if points.len() / dim < 2 {
            return Err(Error::param("an ensemble needs at least two particles"));
        }
        if points.iter().any(|v| !v.is_finite()) {
            return Err(Error::param("particle coordinates must be finite"));
        }
        Ok(ParticleEnsemble {
            points,
            dim,
            step_index: 0,
            seed,
        })
    }

    /// `n` draws from `N(mean, var·I)`.
    pub fn gaussian(n: usize, mean: &[f64], var: f64, seed: u64, how: InitSampling) -> Result<Self> {
        if n == 0 {
            return Err(Error::param("ensemble needs at least one particle"));
        }
        if !(var > 0.0) {
            return Err(Error::param("initial variance must be positive"));
        }
        let d = mean.len();
        let sd = var.sqrt();
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut points = vec![0.0; n * d];
        match how {
            InitSampling::Random => {
                for (i, p) in points.iter_mut().enumerate() {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    *p = mean[i % d] + sd * z;
                }
            }
            InitSampling::Quantile => {
                let normal = Normal::standard();
                let q: Vec<f64> = (0..n).map(|i| normal.inverse_cdf((i as f64 + 0.5) / n as f64)).collect();
                for k in 0..d {
                    let mut order: Vec<usize> = (0..n).collect();
                    if d > 1 {
                        order.shuffle(&mut rng);
                    }
                    for (i, &j) in order.iter().enumerate() {
                        points[i * d + k] = mean[k] + sd * q[j];
                    }
                }
            }
        }
        ParticleEnsemble::new(points, d, seed)
    }

    pub fn len(&self) -> usize {
        self.points.len() / self.dim
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn point(&self, i: usize) -> &[f64] {
        &self.points[i * self.dim..(i + 1) * self.dim]
    }

    pub fn coordinate(&self, k: usize) -> Vec<f64> {
        self.points.iter().skip(k).step_by(self.dim).copied().collect()
    }

    pub fn mean(&self) -> Vec<f64> {
        (0..self.dim).map(|k| mean_var(&self.coordinate(k)).0).collect()
    }

    pub fn to_csv(&self) -> String {
        let mut s: String = (0..self.dim).map(|k| format!("x{}", k + 1)).collect::<Vec<_>>().join(",");
        s.push('\n');
        for i in 0..self.len() {
            let row: Vec<String> = self.point(i).iter().map(|v| format!("{v:?}")).collect();
            s.push_str(&row.join(","));
            s.push('\n');
        }
        s
    }
}

/// Kernel bandwidth for density estimation.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Bandwidth {
    /// Silverman's rule per axis.
    #[default]
    Auto,
    Fixed(f64),
}

/// Silverman's rule `(4/((d+2)N))^{1/(d+4)} σ̂_k` for each axis.
pub fn silverman_bandwidth(ens: &ParticleEnsemble) -> Result<Vec<f64>> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateDensity("density estimation needs at least 2 particles".into()));
    }
    let d = ens.dim as f64;
    let factor = (4.0 / ((d + 2.0) * n as f64)).powf(1.0 / (d + 4.0));
    (0..ens.dim)
        .map(|k| {
            let sd = mean_var(&ens.coordinate(k)).1.sqrt();
            if sd > 0.0 {
                Ok(factor * sd)
            } else {
                Err(Error::DegenerateDensity("particles have zero spread; pass a bandwidth".into()))
            }
        })
        .collect()
}

/// Gaussian kernel density estimate of the first `grid.dim()` coordinates,
/// normalized on the grid.
pub fn kde(ens: &ParticleEnsemble, bandwidth: Bandwidth, grid: &Grid) -> Result<GridDensity> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateDensity("density estimation needs at least 2 particles".into()));
    }
    let gd = grid.dim();
    if gd > ens.dim {
        return Err(Error::param("query grid has more dimensions than the particles"));
    }
    let bw = match bandwidth {
        Bandwidth::Auto => silverman_bandwidth(ens)?,
        Bandwidth::Fixed(b) => {
            if !(b > 0.0 && b.is_finite()) {
                return Err(Error::param(format!("bandwidth must be positive, got {b}")));
            }
            vec![b; ens.dim]
        }
    };
    // per-axis kernel tables, particle-major
    let tables: Vec<Vec<f64>> = (0..gd)
        .map(|k| {
            let axis = &grid.axes()[k];
            let h = bw[k];
            let norm = 1.0 / ((2.0 * std::f64::consts::PI).sqrt() * h * n as f64);
            let norm = if k == 0 { norm } else { norm * n as f64 };
            let xs = axis.points();
            let mut t = vec![0.0; n * axis.n];
            t.par_chunks_mut(axis.n).enumerate().for_each(|(j, row)| {
                let c = ens.points[j * ens.dim + k];
                for (r, x) in row.iter_mut().zip(&xs) {
                    let z = (x - c) / h;
                    *r = norm * (-0.5 * z * z).exp();
                }
            });
            t
        })
        .collect();
    let shape = grid.shape();
    let values: Vec<f64> = (0..grid.len())
        .into_par_iter()
        .map(|flat| {
            let mut idx = [0usize; MAX_GRID_DIM];
            grid.unravel(flat, &mut idx[..gd]);
            let mut acc = 0.0;
            for j in 0..n {
                let mut w = 1.0;
                for k in 0..gd {
                    w *= tables[k][j * shape[k] + idx[k]];
                }
                acc += w;
            }
            acc
        })
        .collect();
    GridDensity::new(grid.clone(), values)?.normalize()
}

/// One diagnostics row.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub iter: usize,
    pub kl: f64,
    pub fisher: f64,
    pub m0: f64,
    pub tv: f64,
    pub w2: f64,
    pub kl_bound: f64,
    pub wallclock_ms: f64,
}

impl DiagnosticsReport {
    /// All grid functionals of `g` against the target. `w2` is only
    /// computed for 1-D grids.
    pub fn from_grid(iter: usize, g: &GridDensity, target: &Potential, beta: f64) -> Result<Self> {
        Ok(DiagnosticsReport {
            iter,
            kl: kl_divergence(g, target, beta)?,
            fisher: fisher_information(g, target, beta)?,
            m0: fourth_moment_m0(g, target, beta)?,
            tv: tv_distance(g, target, beta)?,
            w2: if g.dim() == 1 { w2_grid(g, target, beta)? } else { f64::NAN },
            kl_bound: f64::NAN,
            wallclock_ms: 0.0,
        })
    }
}

/// Default 1-D diagnostics axis.
pub fn default_axis() -> Axis {
    Axis {
        lo: -12.0,
        hi: 12.0,
        n: 2401,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn line(lo: f64, hi: f64, n: usize) -> Grid {
        Grid::uniform(lo, hi, n, 1).unwrap()
    }

    fn quad() -> Potential {
        Potential::quadratic(1.0, 1).unwrap()
    }

    #[test]
    fn normalize_examples() {
        let g = GridDensity::new(line(0.0, 1.0, 11), vec![2.0; 11]).unwrap().normalize().unwrap();
        assert!(g.values.iter().all(|v| (v - 1.0).abs() < 1e-14));
        let grid = line(-8.0, 8.0, 1601);
        let raw = GridDensity::from_fn(grid, |x| (-0.5 * x[0] * x[0]).exp()).unwrap();
        let n = raw.normalize().unwrap();
        assert!((n.mass() - 1.0).abs() < 1e-12);
        let pts = n.grid.axes()[0].points();
        for (x, v) in pts.iter().zip(&n.values) {
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((v - pdf).abs() < 1e-6);
        }
        let z = GridDensity::new(line(0.0, 1.0, 5), vec![0.0; 5]).unwrap();
        assert!(matches!(z.normalize(), Err(Error::DegenerateDensity(_))));
    }

    #[test]
    fn gaussian_kl_fisher_m0_closed_forms() {
        let grid = line(-10.0, 10.0, 1601);
        let g = GridDensity::gaussian(grid.clone(), &[0.0], 2.0).unwrap();
        let kl = kl_divergence(&g, &quad(), 1.0).unwrap();
        assert!((kl - 0.5 * (2.0 - 1.0 - 2f64.ln())).abs() < 1e-6);
        let fi = fisher_information(&g, &quad(), 1.0).unwrap();
        assert!((fi - 0.5).abs() < 1e-5);
        let m0 = fourth_moment_m0(&g, &quad(), 1.0).unwrap();
        assert!((m0 - 0.75).abs() < 1e-4);
        assert!(m0 >= fi * fi);
        let shifted = GridDensity::gaussian(grid.clone(), &[1.0], 1.0).unwrap();
        assert!((kl_divergence(&shifted, &quad(), 1.0).unwrap() - 0.5).abs() < 1e-6);
        let t = GridDensity::target(grid, &quad(), 1.0).unwrap();
        assert!(kl_divergence(&t, &quad(), 1.0).unwrap().abs() < 1e-10);
        assert!(fisher_information(&t, &quad(), 1.0).unwrap().abs() < 1e-8);
        assert!(tv_distance(&t, &quad(), 1.0).unwrap().abs() < 1e-12);
    }

    #[test]
    fn narrow_grid_is_rejected() {
        let g = GridDensity::gaussian(line(-3.0, 3.0, 601), &[0.0], 1.0).unwrap();
        assert!(matches!(kl_divergence(&g, &quad(), 1.0), Err(Error::Truncation(_))));
    }

    #[test]
    fn w2_examples() {
        assert_eq!(w2_1d(&[0.0, 1.0], &[1.0, 2.0]).unwrap(), 1.0);
        assert_eq!(w2_1d(&[0.5, 3.0], &[0.5, 3.0]).unwrap(), 0.0);
        assert!(w2_1d(&[1.0, 0.0], &[0.0, 1.0]).is_err());
        assert!(w2_1d(&[0.0], &[0.0, 1.0]).is_err());
        let g = GridDensity::gaussian(line(-12.0, 12.0, 2401), &[0.5], 1.0).unwrap();
        assert!((w2_grid(&g, &quad(), 1.0).unwrap() - 0.5).abs() < 2e-3);
    }

    #[test]
    fn fp_rhs_examples() {
        let grid = line(-12.0, 12.0, 1601);
        let t = GridDensity::target(grid.clone(), &quad(), 1.0).unwrap();
        let r = fp_rhs(&t, &quad(), 1.0).unwrap();
        assert!(r.iter().all(|v| v.abs() <= 1e-4));
        let grid = line(-8.0, 8.0, 1601);
        let g = GridDensity::gaussian(grid.clone(), &[0.0], 1.0).unwrap();
        let beta = 2.0;
        let r = fp_rhs(&g, &Potential::zero(1).unwrap(), beta).unwrap();
        for (x, v) in grid.axes()[0].points().iter().zip(&r) {
            let pdf = (-0.5 * x * x).exp() / (2.0 * std::f64::consts::PI).sqrt();
            assert!((v - (x * x - 1.0) * pdf / beta).abs() < 1e-5);
        }
        let g4 = GridDensity::gaussian(line(-12.0, 12.0, 2401), &[0.3], 4.0).unwrap();
        let r4 = fp_rhs(&g4, &quad(), 1.0).unwrap();
        assert!(g4.grid.integrate(&r4).abs() < 1e-6);
        assert!(fp_rhs(&GridDensity::new(line(0.0, 1.0, 4), vec![1.0; 4]).unwrap(), &quad(), 1.0).is_err());
    }

    #[test]
    fn kde_of_point_mass_is_the_kernel() {
        let ens = ParticleEnsemble::new(vec![0.7; 10], 1, 0).unwrap();
        let grid = line(-8.0, 8.0, 1601);
        let g = kde(&ens, Bandwidth::Fixed(0.5), &grid).unwrap();
        for (x, v) in grid.axes()[0].points().iter().zip(&g.values) {
            let z = (x - 0.7) / 0.5;
            let pdf = (-0.5 * z * z).exp() / (0.5 * (2.0 * std::f64::consts::PI).sqrt());
            assert!((v - pdf).abs() < 1e-8);
        }
        assert!(ParticleEnsemble::new(vec![0.0], 1, 0).is_err());
        assert!(kde(&ens, Bandwidth::Fixed(0.0), &grid).is_err());
    }

    #[test]
    fn silverman_rule() {
        let ens = ParticleEnsemble::gaussian(1000, &[0.0], 1.0, 9, InitSampling::Random).unwrap();
        let (_, v) = mean_var(&ens.coordinate(0));
        let h = silverman_bandwidth(&ens).unwrap()[0];
        assert_eq!(h, (4.0 / 3000.0f64).powf(0.2) * v.sqrt());
    }

    #[test]
    fn quantile_init_is_stratified() {
        let ens = ParticleEnsemble::gaussian(2000, &[0.0], 2.0, 1, InitSampling::Quantile).unwrap();
        let (m, v) = mean_var(&ens.coordinate(0));
        assert!(m.abs() < 1e-12);
        assert!((v - 2.0).abs() < 0.01);
    }

    #[test]
    fn pl_inequality_for_gaussians() {
        let grid = line(-12.0, 12.0, 2401);
        for i in 0..20 {
            let mu = -1.0 + 0.1 * i as f64;
            let var = 0.3 + 0.15 * i as f64;
            let g = GridDensity::gaussian(grid.clone(), &[mu], var).unwrap();
            let kl = kl_divergence(&g, &quad(), 1.0).unwrap();
            let fi = fisher_information(&g, &quad(), 1.0).unwrap();
            assert!(fi >= 2.0 * kl - 1e-6);
        }
    }
}

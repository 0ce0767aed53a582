//! Particle samplers: BRWP in three density variants, ULA, and the
//! explicit Euler discretization of the probability flow.
//!
//! Every deterministic method updates all particles from one score
//! snapshot, so permuting the input permutes the output. ULA draws its
//! noise sequentially from a seeded ChaCha stream before the parallel
//! update, which keeps runs reproducible for any thread count.

use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::density::{
    self, default_axis, gaussian_fit_kl, kde, mean_var, Bandwidth, DiagnosticsReport, GridDensity, InitSampling,
    ParticleEnsemble,
};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid, MAX_GRID_DIM};
use crate::potential::Potential;
use crate::proximal::{prox_particle_score, KernelProx, ProxBackend, ProxOutput, ProxParams};
use crate::theory::{kl_k_bound, max_stepsize, BoundInputs};

/// Particles allowed off the score grid in one step before the run aborts.
pub const MAX_OFF_GRID_FRACTION: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    /// Score of the proximal image of a kernel density estimate.
    BrwpKde,
    /// Score of a density chain evolved by repeated proximal steps.
    #[default]
    BrwpSuccessive,
    /// Score of the proximal image of the empirical measure.
    BrwpParticle,
    Ula,
    /// Score of the current kernel density estimate, no proximal step.
    ExplicitFlow,
}

impl Method {
    pub fn name(&self) -> &'static str {
        match self {
            Method::BrwpKde => "brwp_kde",
            Method::BrwpSuccessive => "brwp_successive",
            Method::BrwpParticle => "brwp_particle",
            Method::Ula => "ula",
            Method::ExplicitFlow => "explicit_flow",
        }
    }

    pub fn parse(s: &str) -> Result<Self> {
        Ok(match s {
            "brwp_kde" => Method::BrwpKde,
            "brwp_successive" => Method::BrwpSuccessive,
            "brwp_particle" => Method::BrwpParticle,
            "ula" => Method::Ula,
            "explicit_flow" => Method::ExplicitFlow,
            other => return Err(Error::param(format!("unknown method `{other}`"))),
        })
    }

    pub fn is_brwp(&self) -> bool {
        matches!(self, Method::BrwpKde | Method::BrwpSuccessive | Method::BrwpParticle)
    }

    pub fn uses_grid(&self) -> bool {
        matches!(self, Method::BrwpKde | Method::BrwpSuccessive)
    }
}

/// How diagnostics are estimated from particles.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum DiagEstimator {
    /// Kernel density estimate of the first coordinate on the diagnostics axis.
    #[default]
    Kde,
    /// Moment-matched Gaussian of the first coordinate (Gaussian targets).
    GaussianFit,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub method: Method,
    pub h: f64,
    /// Proximal stepsize; `None` means `T = h`.
    pub t: Option<f64>,
    pub beta: f64,
    pub n_particles: usize,
    pub n_steps: usize,
    pub seed: u64,
    pub backend: ProxBackend,
    pub bandwidth: Bandwidth,
    /// Initial law `N(init_mean·1, init_var·I)`.
    pub init_mean: f64,
    pub init_var: f64,
    pub init_sampling: InitSampling,
    /// Score grid, replicated on every axis.
    pub grid: Axis,
    /// Axis for first-coordinate diagnostics.
    pub diag_axis: Axis,
    pub diag_every: usize,
    pub diag_estimator: DiagEstimator,
    pub record_wallclock: bool,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            method: Method::BrwpSuccessive,
            h: 0.05,
            t: None,
            beta: 1.0,
            n_particles: 500,
            n_steps: 50,
            seed: 0,
            backend: ProxBackend::Quadrature,
            bandwidth: Bandwidth::Auto,
            init_mean: 0.0,
            init_var: 2.0,
            init_sampling: InitSampling::Random,
            grid: default_axis(),
            diag_axis: default_axis(),
            diag_every: 1,
            diag_estimator: DiagEstimator::Kde,
            record_wallclock: false,
        }
    }
}

impl SamplerConfig {
    pub fn t(&self) -> f64 {
        self.t.unwrap_or(self.h)
    }

    /// Checks the configuration and returns non-fatal warnings.
    pub fn validate(&self, target: &Potential) -> Result<Vec<String>> {
        let mut warnings = Vec::new();
        if !(self.h > 0.0 && self.h.is_finite()) {
            return Err(Error::param(format!("h must be positive, got {}", self.h)));
        }
        let t = self.t();
        if !(t > 0.0 && t <= self.h) {
            return Err(Error::param(format!("T must lie in (0, h], got T = {t}, h = {}", self.h)));
        }
        if !(self.beta > 0.0) {
            return Err(Error::param("beta must be positive"));
        }
        if self.n_particles == 0 {
            return Err(Error::param("n_particles must be positive"));
        }
        if self.diag_every == 0 {
            return Err(Error::param("diag_every must be positive"));
        }
        if self.method.uses_grid() && target.dim() > MAX_GRID_DIM {
            return Err(Error::param(format!(
                "{} needs a tensor grid; dimension {} exceeds {MAX_GRID_DIM}",
                self.method.name(),
                target.dim()
            )));
        }
        if self.method.uses_grid() && self.backend == ProxBackend::Particle {
            return Err(Error::param(format!("{} runs on a grid backend", self.method.name())));
        }
        if let Some(alpha) = target.alpha() {
            if self.h > max_stepsize(alpha) {
                warnings.push(format!(
                    "h = {} exceeds the maximal stable stepsize 2/(3α) = {:.4}",
                    self.h,
                    max_stepsize(alpha)
                ));
            }
        }
        Ok(warnings)
    }

    pub fn bound_inputs(&self, target: &Potential, kl0: f64, m0: f64) -> Option<BoundInputs> {
        let alpha = target.alpha()?;
        Some(BoundInputs {
            alpha,
            beta: self.beta,
            h: self.h,
            s: self.t() / self.h,
            kl0,
            m0,
        })
    }
}

/// Everything a run produces.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct RunRecord {
    pub method: Method,
    pub backend: ProxBackend,
    pub seed: u64,
    pub rows: Vec<DiagnosticsReport>,
    pub final_ensemble: ParticleEnsemble,
    pub warnings: Vec<String>,
}

/// Stateful sampler.
pub struct Sampler {
    cfg: SamplerConfig,
    target: Potential,
    ens: ParticleEnsemble,
    rng: ChaCha8Rng,
    kernel: Option<KernelProx>,
    chain: Option<GridDensity>,
    marginal: Option<Potential>,
    diag_grid: Grid,
    warnings: Vec<String>,
    kl0_m0: Option<(f64, f64)>,
}

impl Sampler {
    pub fn new(cfg: SamplerConfig, target: Potential) -> Result<Self> {
        let d = target.dim();
        let mean = vec![cfg.init_mean; d];
        let ens = ParticleEnsemble::gaussian(cfg.n_particles, &mean, cfg.init_var, cfg.seed, cfg.init_sampling)?;
        Sampler::with_ensemble(cfg, target, ens, None)
    }

    /// Starts from a given ensemble and, for the successive method, a
    /// given initial density (defaults to the initial law on the grid).
    pub fn with_ensemble(
        cfg: SamplerConfig,
        target: Potential,
        ens: ParticleEnsemble,
        chain0: Option<GridDensity>,
    ) -> Result<Self> {
        let warnings = cfg.validate(&target)?;
        let d = target.dim();
        if ens.dim != d {
            return Err(Error::param("ensemble dimension does not match the target"));
        }
        let score_grid = Grid::new(vec![cfg.grid.clone(); d.min(MAX_GRID_DIM)])?;
        let kernel = if cfg.method.uses_grid() {
            let p = ProxParams::new(cfg.t(), cfg.beta)?;
            Some(KernelProx::new(&score_grid, &target, p, cfg.backend)?)
        } else {
            None
        };
        let chain = match (cfg.method, chain0) {
            (Method::BrwpSuccessive, Some(c)) => {
                if c.grid != score_grid {
                    return Err(Error::param("initial density must live on the score grid"));
                }
                Some(c.normalize()?)
            }
            (Method::BrwpSuccessive, None) => {
                let mean = vec![cfg.init_mean; d];
                Some(GridDensity::gaussian(score_grid, &mean, cfg.init_var)?.normalize()?)
            }
            _ => None,
        };
        let marginal = target.marginal_first(cfg.beta);
        let diag_grid = Grid::new(vec![cfg.diag_axis.clone()])?;
        // the noise stream is independent of the initialization stream
        let rng = ChaCha8Rng::seed_from_u64(cfg.seed ^ 0x9e37_79b9_7f4a_7c15);
        Ok(Sampler {
            cfg,
            target,
            ens,
            rng,
            kernel,
            chain,
            marginal,
            diag_grid,
            warnings,
            kl0_m0: None,
        })
    }

    pub fn ensemble(&self) -> &ParticleEnsemble {
        &self.ens
    }

    pub fn chain(&self) -> Option<&GridDensity> {
        self.chain.as_ref()
    }

    pub fn warnings(&self) -> &[String] {
        &self.warnings
    }

    pub fn config(&self) -> &SamplerConfig {
        &self.cfg
    }

    /// Scores `∇ log ρ` used by the deterministic methods, one per particle.
    fn scores(&mut self) -> Result<Vec<f64>> {
        let d = self.ens.dim;
        let n = self.ens.len();
        match self.cfg.method {
            Method::BrwpParticle => {
                let p = ProxParams::new(self.cfg.t(), self.cfg.beta)?;
                prox_particle_score(&self.ens, &self.target, &p)
            }
            Method::ExplicitFlow => kde_score(&self.ens, self.cfg.bandwidth),
            Method::BrwpKde => {
                let kernel = self.kernel.as_ref().expect("grid kernel");
                let rho = kde(&self.ens, self.cfg.bandwidth, kernel.grid())?;
                let out = kernel.apply(&rho, true)?;
                self.grid_scores(&out)
            }
            Method::BrwpSuccessive => {
                let kernel = self.kernel.as_ref().expect("grid kernel");
                let out = kernel.apply(self.chain.as_ref().expect("density chain"), true)?;
                let s = self.grid_scores(&out)?;
                self.chain = Some(out.density);
                Ok(s)
            }
            Method::Ula => Ok(vec![0.0; n * d]),
        }
    }

    fn grid_scores(&mut self, out: &ProxOutput) -> Result<Vec<f64>> {
        let kernel = self.kernel.as_ref().expect("grid kernel");
        let n = self.ens.len();
        let mut s = vec![0.0; self.ens.points.len()];
        let clamped = kernel.score_at(out, &self.ens.points, self.ens.dim, &mut s)?;
        for w in &out.warnings {
            if !self.warnings.contains(w) {
                self.warnings.push(w.clone());
            }
        }
        if clamped as f64 > MAX_OFF_GRID_FRACTION * n as f64 {
            return Err(Error::OffGrid { clamped, total: n });
        }
        if clamped > 0 {
            self.warnings.push(format!(
                "step {}: {clamped} particles clamped to the score grid",
                self.ens.step_index
            ));
        }
        Ok(s)
    }

    /// Advances every particle by one step.
    pub fn step(&mut self) -> Result<()> {
        let d = self.ens.dim;
        let h = self.cfg.h;
        let beta = self.cfg.beta;
        if self.cfg.method == Method::Ula {
            let noise: Vec<f64> = (0..self.ens.points.len())
                .map(|_| StandardNormal.sample(&mut self.rng))
                .collect();
            ula_step(&mut self.ens, &self.target, h, beta, &noise)?;
        } else {
            let scores = self.scores()?;
            let target = &self.target;
            self.ens
                .points
                .par_chunks_mut(d)
                .zip(scores.par_chunks(d))
                .for_each(|(x, s)| {
                    let g = target.gradient_vec(x);
                    for k in 0..d {
                        x[k] -= h * (g[k] + s[k] / beta);
                    }
                });
            self.ens.step_index += 1;
        }
        if let Some(i) = self.ens.points.iter().position(|v| !v.is_finite()) {
            return Err(Error::DegenerateDensity(format!(
                "particle {} left the finite range",
                i / d
            )));
        }
        Ok(())
    }

    /// Diagnostics of the first coordinate against the first marginal of the target.
    pub fn diagnostics(&mut self) -> Result<DiagnosticsReport> {
        let iter = self.ens.step_index;
        let xs = self.ens.coordinate(0);
        let Some(marginal) = self.marginal.clone() else {
            return Ok(DiagnosticsReport {
                iter,
                kl: f64::NAN,
                fisher: f64::NAN,
                m0: f64::NAN,
                tv: f64::NAN,
                w2: f64::NAN,
                kl_bound: f64::NAN,
                wallclock_ms: 0.0,
            });
        };
        let beta = self.cfg.beta;
        let mut row = match self.cfg.diag_estimator {
            DiagEstimator::Kde => {
                let ens1 = ParticleEnsemble::new(xs.clone(), 1, self.ens.seed)?;
                let g = kde(&ens1, self.cfg.bandwidth, &self.diag_grid)?;
                DiagnosticsReport::from_grid(iter, &g, &marginal, beta)?
            }
            DiagEstimator::GaussianFit => {
                let Potential::Quadratic { alpha, .. } = marginal else {
                    return Err(Error::param("Gaussian-fit diagnostics need a quadratic target"));
                };
                let (m, v) = mean_var(&xs);
                let g = GridDensity::gaussian(self.diag_grid.clone(), &[m], v)?;
                let mut r = DiagnosticsReport::from_grid(iter, &g, &marginal, beta)?;
                r.kl = gaussian_fit_kl(m, v, 1.0 / (alpha * beta));
                r
            }
        };
        row.w2 = density::w2_samples(&xs, &marginal, beta, &self.diag_grid)?;
        if self.cfg.method.is_brwp() {
            if self.kl0_m0.is_none() {
                self.kl0_m0 = Some((row.kl, row.m0));
            }
            let (kl0, m0) = self.kl0_m0.expect("set above");
            if let Some(inp) = self.cfg.bound_inputs(&self.target, kl0.max(0.0), m0.max(0.0)) {
                row.kl_bound = kl_k_bound(iter, &inp).unwrap_or(f64::NAN);
            }
        }
        Ok(row)
    }

    /// Runs all steps, calling `sink` with each diagnostics row.
    pub fn run_with(&mut self, mut sink: impl FnMut(&DiagnosticsReport)) -> Result<Vec<DiagnosticsReport>> {
        let start = Instant::now();
        let mut rows = Vec::new();
        let mut emit = |s: &mut Sampler, rows: &mut Vec<DiagnosticsReport>| -> Result<()> {
            let mut r = s.diagnostics()?;
            if s.cfg.record_wallclock {
                r.wallclock_ms = start.elapsed().as_secs_f64() * 1e3;
            }
            sink(&r);
            rows.push(r);
            Ok(())
        };
        let abort = |iter: usize| move |e: Error| Error::Aborted { iter, source: Box::new(e) };
        emit(self, &mut rows).map_err(abort(0))?;
        for k in 1..=self.cfg.n_steps {
            self.step().map_err(abort(k))?;
            if k % self.cfg.diag_every == 0 || k == self.cfg.n_steps {
                emit(self, &mut rows).map_err(abort(k))?;
            }
        }
        Ok(rows)
    }

    pub fn into_record(self, rows: Vec<DiagnosticsReport>) -> RunRecord {
        RunRecord {
            method: self.cfg.method,
            backend: self.cfg.backend,
            seed: self.cfg.seed,
            rows,
            final_ensemble: self.ens,
            warnings: self.warnings,
        }
    }
}

/// Runs a sampler from its configured initial law.
pub fn run(cfg: &SamplerConfig, target: &Potential) -> Result<RunRecord> {
    let mut s = Sampler::new(cfg.clone(), target.clone())?;
    let rows = s.run_with(|_| {})?;
    Ok(s.into_record(rows))
}

/// One ULA step `x − h∇V(x) + √(2h/β)·z` with explicit noise `z`.
pub fn ula_step(ens: &mut ParticleEnsemble, v: &Potential, h: f64, beta: f64, noise: &[f64]) -> Result<()> {
    if !(h > 0.0) {
        return Err(Error::param("h must be positive"));
    }
    if noise.len() != ens.points.len() {
        return Err(Error::param("noise length does not match the ensemble"));
    }
    let d = ens.dim;
    let amp = (2.0 * h / beta).sqrt();
    ens.points.par_chunks_mut(d).zip(noise.par_chunks(d)).for_each(|(x, z)| {
        let g = v.gradient_vec(x);
        for k in 0..d {
            x[k] += -h * g[k] + amp * z[k];
        }
    });
    ens.step_index += 1;
    Ok(())
}

/// Exact score of a Gaussian kernel density estimate at its own particles.
pub fn kde_score(ens: &ParticleEnsemble, bandwidth: Bandwidth) -> Result<Vec<f64>> {
    let n = ens.len();
    if n < 2 {
        return Err(Error::DegenerateDensity("density estimation needs at least 2 particles".into()));
    }
    let d = ens.dim;
    let bw = match bandwidth {
        Bandwidth::Auto => density::silverman_bandwidth(ens)?,
        Bandwidth::Fixed(b) if b > 0.0 => vec![b; d],
        Bandwidth::Fixed(b) => return Err(Error::param(format!("bandwidth must be positive, got {b}"))),
    };
    let inv: Vec<f64> = bw.iter().map(|b| 1.0 / (b * b)).collect();
    let mut scores = vec![0.0; n * d];
    scores.par_chunks_mut(d).enumerate().for_each(|(i, s)| {
        let x = ens.point(i);
        let logw: Vec<f64> = (0..n)
            .map(|j| {
                let y = ens.point(j);
                -0.5 * (0..d).map(|k| (x[k] - y[k]).powi(2) * inv[k]).sum::<f64>()
            })
            .collect();
        let top = logw.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut z = 0.0;
        let mut acc = vec![0.0; d];
        for j in 0..n {
            let w = (logw[j] - top).exp();
            z += w;
            let y = ens.point(j);
            for k in 0..d {
                acc[k] += w * (y[k] - x[k]) * inv[k];
            }
        }
        for k in 0..d {
            s[k] = acc[k] / z;
        }
    });
    Ok(scores)
}

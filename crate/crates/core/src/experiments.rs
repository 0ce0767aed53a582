//! Reusable experiment drivers shared by the command line and the tests.

use serde::{Deserialize, Serialize};

use crate::density::{kl_divergence, mean_var, tv_distance, DiagnosticsReport, GridDensity};
use crate::error::{Error, Result};
use crate::grid::{Axis, Grid};
use crate::potential::Potential;
use crate::proximal::{
    denominator_exact, denominator_laplace, first_order_expansion, KernelProx, ProxBackend, ProxParams,
};
use crate::samplers::{run, DiagEstimator, Method, RunRecord, SamplerConfig};
use crate::theory::kl_k_bound;

/// Least-squares slope of `log y` against `log x`.
pub fn loglog_slope(x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::param("slope fit needs paired data"));
    }
    if x.len() < 3 {
        return Err(Error::param(format!("slope fit needs at least 3 points, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !(*v > 0.0)) {
        return Err(Error::DegenerateDensity("slope fit needs positive data".into()));
    }
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let n = lx.len() as f64;
    let mx = lx.iter().sum::<f64>() / n;
    let my = ly.iter().sum::<f64>() / n;
    let sxy: f64 = lx.iter().zip(&ly).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = lx.iter().map(|a| (a - mx) * (a - mx)).sum();
    Ok(sxy / sxx)
}

/// One row of a density evolution.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EvolveRow {
    pub iter: usize,
    pub kl: f64,
    /// `∫|ρ_k − ρ*|`.
    pub l1: f64,
    /// Mass before renormalization (1 for the initial row).
    pub mass: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct EvolveReport {
    pub rows: Vec<EvolveRow>,
    /// Densities at the iterations listed in `snapshot_iters`.
    pub snapshots: Vec<(usize, GridDensity)>,
    pub target: GridDensity,
}

impl EvolveReport {
    pub fn final_density(&self) -> &GridDensity {
        &self.snapshots.last().expect("at least the initial snapshot").1
    }
}

/// Iterates `ρ_{k+1} = Prox_T(ρ_k)` on a grid.
pub fn prox_evolve(
    rho0: &GridDensity,
    target: &Potential,
    p: &ProxParams,
    backend: ProxBackend,
    n_iter: usize,
    snapshot_every: usize,
) -> Result<EvolveReport> {
    let kernel = KernelProx::new(&rho0.grid, target, *p, backend)?;
    let star = GridDensity::target(rho0.grid.clone(), target, p.beta)?;
    let mut rho = rho0.normalize()?;
    let mut rows = vec![EvolveRow {
        iter: 0,
        kl: kl_divergence(&rho, target, p.beta)?,
        l1: tv_distance(&rho, target, p.beta)?,
        mass: 1.0,
    }];
    let mut snapshots = vec![(0, rho.clone())];
    for k in 1..=n_iter {
        let out = kernel
            .apply(&rho, false)
            .map_err(|e| Error::Aborted { iter: k, source: Box::new(e) })?;
        rho = out.density;
        rows.push(EvolveRow {
            iter: k,
            kl: kl_divergence(&rho, target, p.beta)?,
            l1: tv_distance(&rho, target, p.beta)?,
            mass: out.mass,
        });
        if (snapshot_every > 0 && k % snapshot_every == 0) || k == n_iter {
            snapshots.push((k, rho.clone()));
        }
    }
    Ok(EvolveReport {
        rows,
        snapshots,
        target: star,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OrderReport {
    pub ts: Vec<f64>,
    pub errors: Vec<f64>,
    pub slope: f64,
}

/// Max-norm gap between one proximal step and its first-order expansion
/// for each `T`, with the fitted log-log slope.
pub fn order_check(
    rho0: &GridDensity,
    target: &Potential,
    beta: f64,
    ts: &[f64],
    backend: ProxBackend,
) -> Result<OrderReport> {
    if ts.len() < 3 {
        return Err(Error::param(format!("order check needs at least 3 stepsizes, got {}", ts.len())));
    }
    let rho0 = rho0.normalize()?;
    let errors = ts
        .iter()
        .map(|&t| {
            let p = ProxParams::new(t, beta)?;
            let prox = KernelProx::new(&rho0.grid, target, p, backend)?.apply(&rho0, false)?;
            let lin = first_order_expansion(&rho0, target, beta, t)?;
            Ok(prox
                .density
                .values
                .iter()
                .zip(&lin.values)
                .map(|(a, b)| (a - b).abs())
                .fold(0.0, f64::max))
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = loglog_slope(ts, &errors)?;
    Ok(OrderReport {
        ts: ts.to_vec(),
        errors,
        slope,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DenominatorReport {
    pub y: Vec<f64>,
    pub ts: Vec<f64>,
    pub exact: Vec<f64>,
    pub laplace: Vec<f64>,
    pub slope: f64,
}

/// Exact versus Laplace denominators over `T` at each query point.
pub fn denominator_check(target: &Potential, beta: f64, ys: &[Vec<f64>], ts: &[f64]) -> Result<Vec<DenominatorReport>> {
    if ts.len() < 3 {
        return Err(Error::param(format!(
            "denominator check needs at least 3 stepsizes, got {}",
            ts.len()
        )));
    }
    if ys.is_empty() {
        return Err(Error::param("denominator check needs query points"));
    }
    ys.iter()
        .map(|y| {
            let mut exact = Vec::new();
            let mut laplace = Vec::new();
            for &t in ts {
                let p = ProxParams::new(t, beta)?;
                exact.push(denominator_exact(y, target, &p)?);
                laplace.push(denominator_laplace(y, target, &p)?);
            }
            let gaps: Vec<f64> = exact.iter().zip(&laplace).map(|(a, b)| (a - b).abs()).collect();
            Ok(DenominatorReport {
                y: y.clone(),
                ts: ts.to_vec(),
                slope: loglog_slope(ts, &gaps)?,
                exact,
                laplace,
            })
        })
        .collect()
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DecayReport {
    pub record: RunRecord,
    pub slack: f64,
    /// Rows where the measured KL exceeds `kl_bound + slack`.
    pub violations: Vec<usize>,
    pub terminal_kl: f64,
}

/// Runs a sampler and compares every row with the closed-form bound plus
/// the slack `0.1·KL₀·h`.
pub fn decay_check(cfg: &SamplerConfig, target: &Potential) -> Result<DecayReport> {
    if target.alpha().is_none() {
        return Err(Error::param("decay check needs a strongly log-concave target"));
    }
    let record = run(cfg, target)?;
    let kl0 = record.rows[0].kl;
    let slack = 0.1 * kl0 * cfg.h;
    let violations = record
        .rows
        .iter()
        .filter(|r| !(r.kl <= r.kl_bound + slack))
        .map(|r| r.iter)
        .collect();
    let terminal_kl = record.rows.last().expect("initial row").kl;
    Ok(DecayReport {
        record,
        slack,
        violations,
        terminal_kl,
    })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepEntry {
    pub h: f64,
    /// First step with KL at or below the threshold.
    pub steps_to_threshold: Option<usize>,
    pub initial_kl: f64,
    pub final_kl: f64,
    pub stable: bool,
    /// Abort message, if the run broke down.
    pub error: Option<String>,
}

/// Runs the same configuration at each `h` (with `T = s·h`).
pub fn stepsize_sweep(base: &SamplerConfig, target: &Potential, hs: &[f64], threshold: f64) -> Result<Vec<SweepEntry>> {
    if hs.is_empty() {
        return Err(Error::param("stepsize sweep needs at least one h"));
    }
    let s = base.t() / base.h;
    hs.iter()
        .map(|&h| {
            let cfg = SamplerConfig {
                h,
                t: Some(s * h),
                ..base.clone()
            };
            cfg.validate(target)?;
            match run(&cfg, target) {
                Ok(rec) => {
                    let kls: Vec<f64> = rec.rows.iter().map(|r| r.kl).collect();
                    let initial_kl = kls[0];
                    let final_kl = *kls.last().expect("initial row");
                    let steps_to_threshold = rec.rows.iter().find(|r| r.kl <= threshold).map(|r| r.iter);
                    Ok(SweepEntry {
                        h,
                        steps_to_threshold,
                        initial_kl,
                        final_kl,
                        stable: is_stable(&kls),
                        error: None,
                    })
                }
                Err(e) if e.is_numerical() => Ok(SweepEntry {
                    h,
                    steps_to_threshold: None,
                    initial_kl: f64::NAN,
                    final_kl: f64::NAN,
                    stable: false,
                    error: Some(e.to_string()),
                }),
                Err(e) => Err(e),
            }
        })
        .collect()
}

/// A KL trace is stable when it stays finite, ends below where it started
/// and its second half stays within 1% of its midpoint value. A trace that
/// settles on a plateau counts as stable.
pub fn is_stable(kls: &[f64]) -> bool {
    if kls.iter().any(|v| !v.is_finite()) || kls.len() < 2 {
        return false;
    }
    let first = kls[0];
    let last = *kls.last().expect("nonempty");
    let mid = kls[kls.len() / 2];
    let late_max = kls[kls.len() / 2..].iter().copied().fold(f64::NEG_INFINITY, f64::max);
    last < first && late_max <= mid * 1.01 + 1e-12
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BiasReport {
    pub method: Method,
    pub hs: Vec<f64>,
    pub terminal_kl: Vec<f64>,
    pub slope: f64,
}

/// Terminal KL of a quadratic-target run for each `h`, measured on the
/// moment-matched Gaussian of the first coordinate.
///
/// Runs last `horizon / h` steps. Deterministic methods report the KL at
/// the horizon. ULA averages the first two moments over the second half of
/// the run to suppress sampling noise, then reports the KL of that fit.
pub fn bias_order(base: &SamplerConfig, target: &Potential, hs: &[f64], horizon: f64) -> Result<BiasReport> {
    let Potential::Quadratic { alpha, .. } = target else {
        return Err(Error::param("bias order check needs a quadratic target"));
    };
    let target_var = 1.0 / (alpha * base.beta);
    let terminal_kl = hs
        .iter()
        .map(|&h| {
            let n_steps = (horizon / h).round() as usize;
            let cfg = SamplerConfig {
                h,
                t: Some(base.t() / base.h * h),
                n_steps,
                diag_every: n_steps.max(1),
                diag_estimator: DiagEstimator::GaussianFit,
                ..base.clone()
            };
            if cfg.method == Method::Ula {
                let mut s = crate::samplers::Sampler::new(cfg, target.clone())?;
                let mut m_acc = 0.0;
                let mut q_acc = 0.0;
                let mut count = 0usize;
                for k in 1..=n_steps {
                    s.step().map_err(|e| Error::Aborted { iter: k, source: Box::new(e) })?;
                    if k > n_steps / 2 {
                        let (m, v) = mean_var(&s.ensemble().coordinate(0));
                        m_acc += m;
                        q_acc += v + m * m;
                        count += 1;
                    }
                }
                let m = m_acc / count as f64;
                let v = q_acc / count as f64 - m * m;
                Ok(crate::density::gaussian_fit_kl(m, v, target_var))
            } else {
                let rec = run(&cfg, target)?;
                Ok(rec.rows.last().expect("terminal row").kl)
            }
        })
        .collect::<Result<Vec<f64>>>()?;
    let slope = loglog_slope(hs, &terminal_kl)?;
    Ok(BiasReport {
        method: base.method,
        hs: hs.to_vec(),
        terminal_kl,
        slope,
    })
}

/// Fraction of particles whose first coordinate is positive.
pub fn mode_balance(rec: &RunRecord) -> f64 {
    let xs = rec.final_ensemble.coordinate(0);
    xs.iter().filter(|x| **x > 0.0).count() as f64 / xs.len() as f64
}

/// Measured KL against the bound at each row, for reporting.
pub fn bound_gaps(rows: &[DiagnosticsReport]) -> Vec<f64> {
    rows.iter().map(|r| r.kl - r.kl_bound).collect()
}

/// Bound evaluated from measured `KL₀` and `M₀` for an arbitrary config.
pub fn bound_curve(cfg: &SamplerConfig, target: &Potential, kl0: f64, m0: f64, ks: &[usize]) -> Result<Vec<f64>> {
    let inp = cfg
        .bound_inputs(target, kl0, m0)
        .ok_or_else(|| Error::param("bound needs a strongly log-concave target"))?;
    ks.iter().map(|&k| kl_k_bound(k, &inp)).collect()
}

/// Catalog ids addressable from configs.
pub const CATALOG: [&str; 4] = ["quadratic", "gaussian_mixture", "l1_l12", "gauss_laplace"];

/// Catalog potential with its default parameters: `α = 1`, mixture means
/// `±2·e₁` with `σ = 1`, Gauss–Laplace `σ = 1`, `b = 0.25`.
pub fn preset(id: &str, dim: usize, beta: f64) -> Result<Potential> {
    match id {
        "quadratic" => Potential::quadratic(1.0, dim),
        "gaussian_mixture" => {
            let mut a = vec![0.0; dim];
            if let Some(a0) = a.first_mut() {
                *a0 = 2.0;
            }
            Potential::gaussian_mixture(a, 1.0, beta)
        }
        "l1_l12" => Potential::l1_l12(dim, beta),
        "gauss_laplace" => Potential::gauss_laplace(dim, 1.0, 0.25, beta),
        other => Err(Error::param(format!("unknown preset `{other}`"))),
    }
}

/// Default first-axis grid for a preset. The L₁/L_{1/2} target has the
/// heaviest tail and gets a wider window.
pub fn preset_axis(id: &str) -> Axis {
    match id {
        "l1_l12" => Axis { lo: -24.0, hi: 24.0, n: 4801 },
        _ => crate::density::default_axis(),
    }
}

/// Uniform 1-D grid helper.
pub fn line_grid(lo: f64, hi: f64, n: usize) -> Result<Grid> {
    Grid::uniform(lo, hi, n, 1)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn slope_of_power_law() {
        let x = [0.2, 0.1, 0.05];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powi(2)).collect();
        assert!((loglog_slope(&x, &y).unwrap() - 2.0).abs() < 1e-12);
        assert!(loglog_slope(&[0.1], &[0.2]).is_err());
    }

    #[test]
    fn short_lists_are_rejected() {
        let q = Potential::quadratic(1.0, 1).unwrap();
        let g = GridDensity::gaussian(line_grid(-12.0, 12.0, 241).unwrap(), &[0.0], 4.0).unwrap();
        assert!(order_check(&g, &q, 1.0, &[0.1], ProxBackend::Quadrature).is_err());
        assert!(denominator_check(&q, 1.0, &[vec![0.0]], &[0.1]).is_err());
        assert!(stepsize_sweep(&SamplerConfig::default(), &q, &[], 1e-3).is_err());
    }

    #[test]
    fn stability_classifier() {
        assert!(is_stable(&[1.0, 0.5, 0.2]));
        assert!(!is_stable(&[1.0, 2.0, 4.0]));
        assert!(!is_stable(&[1.0, 0.5, f64::NAN]));
        assert!(!is_stable(&[0.1, 0.05, 0.2]));
        assert!(is_stable(&[0.15, 0.048, 0.05, 0.050_01, 0.050_01]));
    }
}

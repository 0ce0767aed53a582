use std::path::Path;

use brwp_core::experiments::{self, mode_balance, preset_axis};
use brwp_core::samplers::{run, RunRecord};
use brwp_core::{Grid, GridDensity, Potential, ProxBackend, ProxParams};
use serde::Serialize;

use crate::artifacts::{self, num, write, write_json};
use crate::config::ExperimentConfig;
use crate::CliError;

/// Slope threshold for the order and denominator checks.
pub const MIN_SLOPE: f64 = 1.7;
const MAX_GRID_DIM: usize = 3;

pub enum Outcome {
    Pass,
    Fail(String),
}

fn grid_for(cfg: &ExperimentConfig) -> Result<Grid, CliError> {
    let d = cfg.target.dim;
    if d == 0 || d > MAX_GRID_DIM {
        return Err(CliError::Config(format!("grid experiments need 1 ≤ dim ≤ {MAX_GRID_DIM}, got {d}")));
    }
    let axis = cfg.prox.grid.resolve(preset_axis(&cfg.target.id))?;
    Ok(Grid::new(vec![axis; d])?)
}

fn initial_density(cfg: &ExperimentConfig) -> Result<GridDensity, CliError> {
    let grid = grid_for(cfg)?;
    let mean = vec![cfg.prox.init_mean; cfg.target.dim];
    Ok(GridDensity::gaussian(grid, &mean, cfg.prox.init_var)?)
}

fn require_grid_backend(b: ProxBackend) -> Result<(), CliError> {
    if b == ProxBackend::Particle {
        return Err(CliError::Config("this experiment needs a grid backend".into()));
    }
    Ok(())
}

/// First-coordinate target density on the diagnostics axis, when a closed
/// form marginal exists.
fn target_marginal_csv(v: &Potential, beta: f64, cfg: &ExperimentConfig) -> Result<Option<String>, CliError> {
    let Some(m) = v.marginal_first(beta) else {
        return Ok(None);
    };
    let axis = cfg.sampler.diag_axis.resolve(preset_axis(&cfg.target.id))?;
    Ok(Some(GridDensity::target(Grid::new(vec![axis])?, &m, beta)?.to_csv()))
}

fn write_record(dir: &Path, rec: &RunRecord, v: &Potential, cfg: &ExperimentConfig) -> Result<(), CliError> {
    write(dir, "run.csv", &artifacts::run_csv(&rec.rows))?;
    write(dir, "ensemble.csv", &rec.final_ensemble.to_csv())?;
    if let Some(t) = target_marginal_csv(v, cfg.target.beta, cfg)? {
        write(dir, "target.csv", &t)?;
    }
    for w in &rec.warnings {
        eprintln!("warning: {w}");
    }
    Ok(())
}

pub fn prox_evolve(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    let v = cfg.target.potential()?;
    let rho0 = initial_density(cfg)?;
    let p = ProxParams::new(cfg.prox.t, cfg.target.beta)?;
    let rep = experiments::prox_evolve(&rho0, &v, &p, cfg.prox.backend, cfg.prox.iters, cfg.prox.snapshot_every)?;

    let mut l1 = String::from("iter,kl,l1,mass\n");
    for r in &rep.rows {
        l1.push_str(&format!("{},{},{},{}\n", r.iter, num(r.kl), num(r.l1), num(r.mass)));
    }
    write(dir, "l1.csv", &l1)?;
    for (k, d) in &rep.snapshots {
        write(dir, &format!("densities/density_{k:06}.csv"), &d.to_csv())?;
    }
    write(dir, "target.csv", &rep.target.to_csv())?;

    let last = rep.rows.last().expect("initial row");
    #[derive(Serialize)]
    struct Summary {
        iters: usize,
        t: f64,
        final_kl: f64,
        final_l1: f64,
    }
    write_json(
        dir,
        "summary.json",
        &Summary {
            iters: last.iter,
            t: cfg.prox.t,
            final_kl: last.kl,
            final_l1: last.l1,
        },
    )?;
    println!("prox-evolve: {} iterations, final L1 {}, KL {}", last.iter, num(last.l1), num(last.kl));
    Ok(Outcome::Pass)
}

pub fn sample(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    let v = cfg.target.potential()?;
    let scfg = cfg.sampler.to_core(&cfg.target)?;
    let rec = run(&scfg, &v)?;
    write_record(dir, &rec, &v, cfg)?;
    let last = rec.rows.last().expect("initial row");
    #[derive(Serialize)]
    struct Summary<'a> {
        method: &'a str,
        steps: usize,
        final_kl: f64,
        positive_fraction: f64,
        warnings: &'a [String],
    }
    let balance = mode_balance(&rec);
    write_json(
        dir,
        "summary.json",
        &Summary {
            method: scfg.method.name(),
            steps: last.iter,
            final_kl: last.kl,
            positive_fraction: balance,
            warnings: &rec.warnings,
        },
    )?;
    println!(
        "sample: {} for {} steps, final KL {}, fraction x₁ > 0 = {}",
        scfg.method.name(),
        last.iter,
        num(last.kl),
        num(balance)
    );
    Ok(Outcome::Pass)
}

fn check_order_target(cfg: &ExperimentConfig) -> Result<(), CliError> {
    match cfg.target.id.as_str() {
        "quadratic" | "gaussian_mixture" => Ok(()),
        id => Err(CliError::Config(format!(
            "order and denominator checks need a quadratic or gaussian_mixture target, got `{id}`"
        ))),
    }
}

pub fn order_check(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    check_order_target(cfg)?;
    require_grid_backend(cfg.prox.backend)?;
    let v = cfg.target.potential()?;
    let rho0 = initial_density(cfg)?;
    let ts = cfg.order.ts(&cfg.target);
    let rep = experiments::order_check(&rho0, &v, cfg.target.beta, &ts, cfg.prox.backend)?;
    let mut csv = String::from("t,error\n");
    for (t, e) in rep.ts.iter().zip(&rep.errors) {
        csv.push_str(&format!("{},{}\n", num(*t), num(*e)));
    }
    write(dir, "order.csv", &csv)?;
    write_json(dir, "summary.json", &rep)?;
    println!("order-check: slope {}", num(rep.slope));
    Ok(if rep.slope >= MIN_SLOPE {
        Outcome::Pass
    } else {
        Outcome::Fail(format!("slope {} below {MIN_SLOPE}", num(rep.slope)))
    })
}

pub fn denominator_check(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    check_order_target(cfg)?;
    let v = cfg.target.potential()?;
    let ys: Vec<Vec<f64>> = cfg
        .denominator
        .ys
        .iter()
        .map(|&y| {
            let mut p = vec![0.0; cfg.target.dim];
            p[0] = y;
            p
        })
        .collect();
    let reps = experiments::denominator_check(&v, cfg.target.beta, &ys, &cfg.denominator.ts)?;
    let mut csv = String::from("y,t,exact,laplace,gap\n");
    for r in &reps {
        for ((t, e), l) in r.ts.iter().zip(&r.exact).zip(&r.laplace) {
            csv.push_str(&format!("{},{},{},{},{}\n", num(r.y[0]), num(*t), num(*e), num(*l), num((e - l).abs())));
        }
    }
    write(dir, "denominator.csv", &csv)?;
    write_json(dir, "summary.json", &reps)?;
    let low: Vec<String> = reps
        .iter()
        .filter(|r| !(r.slope >= MIN_SLOPE))
        .map(|r| format!("y = {}: slope {}", num(r.y[0]), num(r.slope)))
        .collect();
    for r in &reps {
        println!("denominator-check: y = {}, slope {}", num(r.y[0]), num(r.slope));
    }
    Ok(if low.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(low.join("; "))
    })
}

pub fn decay_check(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    let v = cfg.target.potential()?;
    let scfg = cfg.sampler.to_core(&cfg.target)?;
    let rep = experiments::decay_check(&scfg, &v)?;
    write_record(dir, &rep.record, &v, cfg)?;
    #[derive(Serialize)]
    struct Summary<'a> {
        method: &'a str,
        slack: f64,
        violations: &'a [usize],
        terminal_kl: f64,
    }
    write_json(
        dir,
        "summary.json",
        &Summary {
            method: scfg.method.name(),
            slack: rep.slack,
            violations: &rep.violations,
            terminal_kl: rep.terminal_kl,
        },
    )?;
    println!(
        "decay-check: {} rows above bound + {}, terminal KL {}",
        rep.violations.len(),
        num(rep.slack),
        num(rep.terminal_kl)
    );
    Ok(if rep.violations.is_empty() {
        Outcome::Pass
    } else {
        Outcome::Fail(format!(
            "KL above the bound at {} of {} rows (first at iteration {})",
            rep.violations.len(),
            rep.record.rows.len(),
            rep.violations[0]
        ))
    })
}

pub fn stepsize_sweep(cfg: &ExperimentConfig, dir: &Path) -> Result<Outcome, CliError> {
    let v = cfg.target.potential()?;
    let scfg = cfg.sampler.to_core(&cfg.target)?;
    let entries = experiments::stepsize_sweep(&scfg, &v, &cfg.sweep.hs, cfg.sweep.threshold)?;
    let mut csv = String::from("h,steps_to_threshold,initial_kl,final_kl,stable\n");
    for e in &entries {
        let steps = e.steps_to_threshold.map(|s| s.to_string()).unwrap_or_default();
        csv.push_str(&format!(
            "{},{steps},{},{},{}\n",
            num(e.h),
            num(e.initial_kl),
            num(e.final_kl),
            u8::from(e.stable)
        ));
        println!(
            "stepsize-sweep: h = {}, steps to {} = {}, {}",
            num(e.h),
            num(cfg.sweep.threshold),
            if steps.is_empty() { "never" } else { &steps },
            if e.stable { "stable" } else { "unstable" }
        );
    }
    write(dir, "sweep.csv", &csv)?;
    write_json(dir, "summary.json", &entries)?;
    Ok(Outcome::Pass)
}

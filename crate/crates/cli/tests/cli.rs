use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use tempfile::TempDir;

fn brwp(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_brwp")).args(args).output().expect("binary runs")
}

fn code(o: &Output) -> i32 {
    o.status.code().expect("exit code")
}

fn summary(dir: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(dir.join("summary.json")).unwrap()).unwrap()
}

fn out(tmp: &TempDir, name: &str) -> String {
    tmp.path().join(name).to_string_lossy().into_owned()
}

const MIXTURE: [&str; 8] = [
    "--target.id",
    "gaussian_mixture",
    "--sampler.h",
    "0.02",
    "--sampler.n_particles",
    "500",
    "--sampler.n_steps",
    "50",
];

#[test]
fn successive_mixture_run_occupies_both_modes() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "run");
    let mut args = vec!["sample", "--out", &dir, "--seed", "11"];
    args.extend(MIXTURE);
    let o = brwp(&args);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let dir = Path::new(&dir);
    let frac = summary(dir)["positive_fraction"].as_f64().unwrap();
    assert!((0.3..=0.7).contains(&frac), "{frac}");

    let csv = fs::read_to_string(dir.join("run.csv")).unwrap();
    assert!(csv.starts_with("iter,kl,fisher,m0,tv,w2,kl_bound,wallclock_ms\n"));
    assert!(!csv.contains('\r'));
    assert_eq!(csv.lines().count(), 52);
    for name in ["ensemble.csv", "target.csv", "histogram.svg", "kl.svg"] {
        assert!(dir.join(name).exists(), "{name}");
    }

    let m: serde_json::Value = serde_json::from_str(&fs::read_to_string(dir.join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["seed"], 11);
    assert_eq!(m["backend"], "quadrature");
    assert!(m["git_describe"].as_str().is_some_and(|s| !s.is_empty()));
    assert_eq!(m["config"]["sampler"]["h"], 0.02);
    assert_eq!(m["config_keys"]["target.id"], "gaussian_mixture");
}

#[test]
fn ula_runs_are_reproducible_across_thread_counts() {
    let tmp = TempDir::new().unwrap();
    let run = |name: &str, threads: &str, seed: &str| {
        let dir = out(&tmp, name);
        let mut args = vec!["sample", "--out", &dir, "--seed", seed, "--threads", threads, "--sampler.method", "ula"];
        args.extend(MIXTURE);
        let o = brwp(&args);
        assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
        let d = Path::new(&dir);
        (
            fs::read(d.join("run.csv")).unwrap(),
            fs::read(d.join("ensemble.csv")).unwrap(),
            fs::read(d.join("histogram.svg")).unwrap(),
        )
    };
    let a = run("a", "1", "5");
    assert_eq!(a, run("b", "4", "5"));
    assert_ne!(a.1, run("c", "1", "6").1);
}

#[test]
fn config_file_and_overrides_compose() {
    let tmp = TempDir::new().unwrap();
    let cfg = tmp.path().join("exp.cfg");
    fs::write(
        &cfg,
        "target.id = \"quadratic\"\nsampler.method = \"brwp_particle\"\nsampler.n_particles = 200\nsampler.n_steps = 5\nsampler.h = 0.5\n",
    )
    .unwrap();
    let dir = out(&tmp, "run");
    let o = brwp(&["sample", "--config", cfg.to_str().unwrap(), "--out", &dir, "--sampler.h", "0.1"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let m: serde_json::Value =
        serde_json::from_str(&fs::read_to_string(Path::new(&dir).join("manifest.json")).unwrap()).unwrap();
    assert_eq!(m["config"]["sampler"]["h"], 0.1);
    assert_eq!(m["config"]["sampler"]["n_steps"], 5);
    assert_eq!(m["backend"], "particle");
    // α = 1 is known, so the bound column is filled
    let csv = fs::read_to_string(Path::new(&dir).join("run.csv")).unwrap();
    assert!(!csv.lines().nth(1).unwrap().contains("NaN,0.0"));
}

#[test]
fn configuration_errors_exit_with_two() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "x");
    for bad in [
        vec!["sample", "--out", &dir, "--sampler.hh", "0.1"],
        vec!["sample", "--out", &dir, "--sampler.method", "mala"],
        vec!["sample", "--out", &dir, "--target.id", "rosenbrock"],
        vec!["sample", "--out", &dir, "--sampler.h"],
        vec!["sample", "--config", "/nonexistent/brwp.cfg"],
        vec!["sample", "--out", &dir, "--threads", "0"],
        vec!["order-check", "--out", &dir, "--order.ts", "[0.1]"],
        vec!["order-check", "--out", &dir, "--target.id", "l1_l12"],
        vec!["stepsize-sweep", "--out", &dir, "--sweep.hs", "[]"],
        vec!["decay-check", "--out", &dir, "--target.id", "gaussian_mixture"],
        vec!["frobnicate"],
    ] {
        let o = brwp(&bad);
        assert_eq!(code(&o), 2, "{bad:?}: {}", String::from_utf8_lossy(&o.stderr));
    }
}

#[test]
fn particles_leaving_the_grid_abort_with_three() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "x");
    let o = brwp(&[
        "sample",
        "--out",
        &dir,
        "--sampler.grid.lo",
        "-4",
        "--sampler.grid.hi",
        "4",
        "--sampler.grid.n",
        "801",
        "--sampler.init_var",
        "4",
    ]);
    assert_eq!(code(&o), 3, "{}", String::from_utf8_lossy(&o.stderr));
}

#[test]
fn order_and_denominator_checks_pass_on_the_quadratic() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "order");
    let o = brwp(&["order-check", "--out", &dir]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let slope = summary(Path::new(&dir))["slope"].as_f64().unwrap();
    assert!((1.7..=2.3).contains(&slope), "{slope}");
    let csv = fs::read_to_string(Path::new(&dir).join("order.csv")).unwrap();
    assert_eq!(csv.lines().next(), Some("t,error"));
    assert_eq!(csv.lines().count(), 5);

    let dir = out(&tmp, "denominator");
    let o = brwp(&["denominator-check", "--out", &dir]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let s = summary(Path::new(&dir));
    assert_eq!(s.as_array().unwrap().len(), 3);
}

#[test]
fn prox_evolve_writes_snapshots_and_converges() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "evolve");
    let o = brwp(&["prox-evolve", "--out", &dir, "--target.id", "gaussian_mixture", "--prox.snapshot_every", "100"]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let d = Path::new(&dir);
    assert!(summary(d)["final_l1"].as_f64().unwrap() <= 0.05);
    let mut snaps: Vec<String> = fs::read_dir(d.join("densities"))
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .collect();
    snaps.sort();
    assert_eq!(
        snaps,
        ["density_000000.csv", "density_000100.csv", "density_000200.csv", "density_000300.csv", "density_000400.csv"]
    );
    let l1 = fs::read_to_string(d.join("l1.csv")).unwrap();
    assert_eq!(l1.lines().count(), 402);
}

#[test]
fn plots_are_regenerated_from_csvs_alone() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "evolve");
    let o = brwp(&["prox-evolve", "--out", &dir, "--prox.iters", "20", "--prox.t", "0.05"]);
    assert_eq!(code(&o), 0);
    let d = Path::new(&dir);
    let before: Vec<Vec<u8>> = ["overlay.svg", "l1.svg"].iter().map(|n| fs::read(d.join(n)).unwrap()).collect();
    for n in ["overlay.svg", "l1.svg", "manifest.json", "summary.json"] {
        fs::remove_file(d.join(n)).unwrap();
    }
    let o = brwp(&["plot", &dir]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    let after: Vec<Vec<u8>> = ["overlay.svg", "l1.svg"].iter().map(|n| fs::read(d.join(n)).unwrap()).collect();
    assert_eq!(before, after);
}

#[test]
fn decay_check_passes_for_the_particle_scheme() {
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "decay");
    let o = brwp(&[
        "decay-check",
        "--out",
        &dir,
        "--sampler.method",
        "brwp_particle",
        "--sampler.n_particles",
        "2000",
        "--sampler.n_steps",
        "200",
        "--sampler.init_sampling",
        "quantile",
        "--sampler.diag_estimator",
        "gaussian_fit",
    ]);
    assert_eq!(code(&o), 0, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(summary(Path::new(&dir))["violations"].as_array().unwrap().is_empty());
}

#[test]
fn bound_violations_exit_with_one() {
    // the successive scheme settles on a biased plateau above the bound
    let tmp = TempDir::new().unwrap();
    let dir = out(&tmp, "decay");
    let o = brwp(&[
        "decay-check",
        "--out",
        &dir,
        "--sampler.n_particles",
        "2000",
        "--sampler.n_steps",
        "200",
        "--sampler.init_sampling",
        "quantile",
        "--sampler.diag_estimator",
        "gaussian_fit",
    ]);
    assert_eq!(code(&o), 1, "{}", String::from_utf8_lossy(&o.stderr));
    assert!(!summary(Path::new(&dir))["violations"].as_array().unwrap().is_empty());
}

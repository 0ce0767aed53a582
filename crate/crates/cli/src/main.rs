//! `brwp` experiment runner.
//!
//! Exit codes: 0 success, 1 assertion failure, 2 configuration error,
//! 3 numerical abort.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

mod artifacts;
mod commands;
mod config;
mod svg;

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use thiserror::Error;

use commands::Outcome;

#[derive(Debug, Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },

    #[error(transparent)]
    Core(#[from] brwp_core::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        CliError::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(e) if e.is_numerical() => 3,
            _ => 2,
        }
    }
}

#[derive(Parser)]
#[command(name = "brwp", version, about = "Backward regularized Wasserstein proximal sampling experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Iterate the kernel-formula proximal map on a grid.
    ProxEvolve(RunArgs),
    /// Run a particle sampler.
    Sample(RunArgs),
    /// Log-log slope of the first-order expansion error in T.
    OrderCheck(RunArgs),
    /// Log-log slope of the Laplace denominator error in T.
    DenominatorCheck(RunArgs),
    /// Measured KL against the closed-form decay bound.
    DecayCheck(RunArgs),
    /// Steps to a KL threshold and stability over a list of stepsizes.
    StepsizeSweep(RunArgs),
    /// Regenerate the SVG plots of a run directory from its CSVs.
    Plot { dir: PathBuf },
}

#[derive(Args)]
struct RunArgs {
    /// Flat `section.key = value` config file.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Artifact directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Overrides `sampler.seed`.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads; results do not depend on it.
    #[arg(long)]
    threads: Option<usize>,
    /// Further `--section.key value` overrides.
    #[arg(trailing_var_arg = true, allow_hyphen_values = true, value_name = "OVERRIDES")]
    overrides: Vec<String>,
}

fn run(name: &str, args: RunArgs, f: fn(&config::ExperimentConfig, &Path) -> Result<Outcome, CliError>) -> Result<Outcome, CliError> {
    if let Some(n) = args.threads {
        if n == 0 {
            return Err(CliError::Config("--threads must be positive".into()));
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(e.to_string()))?;
    }
    let mut overrides = config::parse_overrides(&args.overrides)?;
    if let Some(seed) = args.seed {
        overrides.push(("sampler.seed".into(), toml::Value::Integer(seed as i64)));
    }
    if let Some(out) = &args.out {
        overrides.push(("output.dir".into(), toml::Value::String(out.to_string_lossy().into_owned())));
    }
    let (cfg, flat) = config::load(args.config.as_deref(), &overrides)?;
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("runs").join(name));
    std::fs::create_dir_all(&dir).map_err(|e| CliError::io(&dir, e))?;

    let backend = match name {
        "prox-evolve" | "order-check" => cfg.prox.backend.name(),
        "denominator-check" => "laplace_denominator",
        _ => cfg.sampler.backend().name(),
    };
    artifacts::write_manifest(&dir, name, &cfg, &flat, cfg.sampler.seed, backend)?;
    let outcome = f(&cfg, &dir)?;
    if cfg.output.plot {
        artifacts::render_plots(&dir)?;
    }
    Ok(outcome)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::ProxEvolve(a) => run("prox-evolve", a, commands::prox_evolve),
        Command::Sample(a) => run("sample", a, commands::sample),
        Command::OrderCheck(a) => run("order-check", a, commands::order_check),
        Command::DenominatorCheck(a) => run("denominator-check", a, commands::denominator_check),
        Command::DecayCheck(a) => run("decay-check", a, commands::decay_check),
        Command::StepsizeSweep(a) => run("stepsize-sweep", a, commands::stepsize_sweep),
        Command::Plot { dir } => artifacts::render_plots(&dir).map(|names| {
            for n in names {
                println!("{}", dir.join(n).display());
            }
            Outcome::Pass
        }),
    };
    match result {
        Ok(Outcome::Pass) => ExitCode::SUCCESS,
        Ok(Outcome::Fail(msg)) => {
            eprintln!("assertion failed: {msg}");
            ExitCode::from(1)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}

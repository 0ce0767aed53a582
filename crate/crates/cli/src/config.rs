//! Flat dotted-key experiment configuration.
//!
//! A config file is a list of `section.key = value` lines (TOML values).
//! Trailing `--section.key value` arguments on the command line replace
//! entries of the same name before the typed config is built.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use brwp_core::density::{Bandwidth, InitSampling};
use brwp_core::experiments::{preset, preset_axis};
use brwp_core::samplers::DiagEstimator;
use brwp_core::{Axis, Method, Potential, ProxBackend, SamplerConfig};
use serde::{Deserialize, Serialize};

use crate::CliError;

pub type FlatConfig = BTreeMap<String, toml::Value>;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub target: TargetSection,
    pub sampler: SamplerSection,
    pub prox: ProxSection,
    pub order: OrderSection,
    pub denominator: DenominatorSection,
    pub sweep: SweepSection,
    pub output: OutputSection,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetSection {
    /// Catalog id.
    pub id: String,
    pub dim: usize,
    pub beta: f64,
    /// Quadratic curvature.
    pub alpha: Option<f64>,
    /// Mixture mean offset `a` (modes at `±a`).
    pub a: Option<Vec<f64>>,
    pub sigma: Option<f64>,
    /// Laplace scale of the Gauss–Laplace preset.
    pub b: Option<f64>,
}

impl Default for TargetSection {
    fn default() -> Self {
        TargetSection {
            id: "quadratic".into(),
            dim: 1,
            beta: 1.0,
            alpha: None,
            a: None,
            sigma: None,
            b: None,
        }
    }
}

impl TargetSection {
    pub fn potential(&self) -> Result<Potential, CliError> {
        let overridden = self.alpha.is_some() || self.a.is_some() || self.sigma.is_some() || self.b.is_some();
        if !overridden {
            return Ok(preset(&self.id, self.dim, self.beta)?);
        }
        let p = match self.id.as_str() {
            "quadratic" => Potential::quadratic(self.alpha.unwrap_or(1.0), self.dim)?,
            "gaussian_mixture" => {
                let a = match &self.a {
                    Some(a) if a.len() != self.dim => {
                        return Err(CliError::Config(format!(
                            "target.a has {} entries for dimension {}",
                            a.len(),
                            self.dim
                        )))
                    }
                    Some(a) => a.clone(),
                    None => {
                        let mut a = vec![0.0; self.dim];
                        a[0] = 2.0;
                        a
                    }
                };
                Potential::gaussian_mixture(a, self.sigma.unwrap_or(1.0), self.beta)?
            }
            "gauss_laplace" => {
                Potential::gauss_laplace(self.dim, self.sigma.unwrap_or(1.0), self.b.unwrap_or(0.25), self.beta)?
            }
            id => return Err(CliError::Config(format!("preset `{id}` takes no parameters"))),
        };
        Ok(p)
    }
}

/// A 1-D axis where any field may fall back to a preset default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AxisSection {
    pub lo: Option<f64>,
    pub hi: Option<f64>,
    pub n: Option<usize>,
}

impl AxisSection {
    pub fn resolve(&self, fallback: Axis) -> Result<Axis, CliError> {
        Ok(Axis::new(
            self.lo.unwrap_or(fallback.lo),
            self.hi.unwrap_or(fallback.hi),
            self.n.unwrap_or(fallback.n),
        )?)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SamplerSection {
    pub method: Method,
    pub h: f64,
    pub t: Option<f64>,
    pub n_particles: usize,
    pub n_steps: usize,
    pub seed: u64,
    /// Defaults to `particle` for brwp_particle and `quadrature` otherwise.
    pub backend: Option<ProxBackend>,
    /// Fixed KDE bandwidth; Silverman's rule when absent.
    pub bandwidth: Option<f64>,
    pub init_mean: f64,
    pub init_var: f64,
    pub init_sampling: InitSampling,
    pub grid: AxisSection,
    pub diag_axis: AxisSection,
    pub diag_every: usize,
    pub diag_estimator: DiagEstimator,
    pub record_wallclock: bool,
}

impl Default for SamplerSection {
    fn default() -> Self {
        let d = SamplerConfig::default();
        SamplerSection {
            method: d.method,
            h: d.h,
            t: d.t,
            n_particles: d.n_particles,
            n_steps: d.n_steps,
            seed: d.seed,
            backend: None,
            bandwidth: None,
            init_mean: d.init_mean,
            init_var: d.init_var,
            init_sampling: d.init_sampling,
            grid: AxisSection::default(),
            diag_axis: AxisSection::default(),
            diag_every: d.diag_every,
            diag_estimator: d.diag_estimator,
            record_wallclock: d.record_wallclock,
        }
    }
}

impl SamplerSection {
    pub fn backend(&self) -> ProxBackend {
        self.backend.unwrap_or(if self.method == Method::BrwpParticle {
            ProxBackend::Particle
        } else {
            ProxBackend::Quadrature
        })
    }

    pub fn to_core(&self, target: &TargetSection) -> Result<SamplerConfig, CliError> {
        let axis = preset_axis(&target.id);
        Ok(SamplerConfig {
            method: self.method,
            h: self.h,
            t: self.t,
            beta: target.beta,
            n_particles: self.n_particles,
            n_steps: self.n_steps,
            seed: self.seed,
            backend: self.backend(),
            bandwidth: self.bandwidth.map_or(Bandwidth::Auto, Bandwidth::Fixed),
            init_mean: self.init_mean,
            init_var: self.init_var,
            init_sampling: self.init_sampling,
            grid: self.grid.resolve(axis.clone())?,
            diag_axis: self.diag_axis.resolve(axis)?,
            diag_every: self.diag_every,
            diag_estimator: self.diag_estimator,
            record_wallclock: self.record_wallclock,
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ProxSection {
    pub t: f64,
    pub iters: usize,
    pub backend: ProxBackend,
    /// Write a density CSV every this many iterations (0: first and last only).
    pub snapshot_every: usize,
    pub init_mean: f64,
    pub init_var: f64,
    /// Axis replicated over every dimension.
    pub grid: AxisSection,
}

impl Default for ProxSection {
    fn default() -> Self {
        ProxSection {
            t: 0.01,
            iters: 400,
            backend: ProxBackend::Quadrature,
            snapshot_every: 10,
            init_mean: 0.0,
            init_var: 2.0,
            grid: AxisSection::default(),
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OrderSection {
    /// Defaults depend on the target; mixtures need smaller `T`.
    pub ts: Option<Vec<f64>>,
}

impl OrderSection {
    pub fn ts(&self, target: &TargetSection) -> Vec<f64> {
        match (&self.ts, target.id.as_str()) {
            (Some(ts), _) => ts.clone(),
            (None, "gaussian_mixture") => vec![0.02, 0.01, 0.005, 0.0025],
            (None, _) => vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct DenominatorSection {
    /// Query points on the first axis.
    pub ys: Vec<f64>,
    pub ts: Vec<f64>,
}

impl Default for DenominatorSection {
    fn default() -> Self {
        DenominatorSection {
            ys: vec![-2.0, 0.0, 2.0],
            ts: vec![0.2, 0.1, 0.05, 0.025],
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SweepSection {
    pub hs: Vec<f64>,
    pub threshold: f64,
}

impl Default for SweepSection {
    fn default() -> Self {
        SweepSection {
            hs: vec![1.0 / 6.0, 1.0 / 3.0, 0.6, 1.0],
            threshold: 1e-3,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: Option<PathBuf>,
    pub plot: bool,
}

impl Default for OutputSection {
    fn default() -> Self {
        OutputSection { dir: None, plot: true }
    }
}

/// Reads a config file into dotted keys.
pub fn read_flat(path: &Path) -> Result<FlatConfig, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
    parse_flat(&text)
}

pub fn parse_flat(text: &str) -> Result<FlatConfig, CliError> {
    let table: toml::Table = text.parse().map_err(|e| CliError::Config(format!("{e}")))?;
    let mut flat = FlatConfig::new();
    flatten("", &table, &mut flat);
    Ok(flat)
}

fn flatten(prefix: &str, table: &toml::Table, out: &mut FlatConfig) {
    for (k, v) in table {
        let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
        match v {
            toml::Value::Table(t) => flatten(&key, t, out),
            v => {
                out.insert(key, v.clone());
            }
        }
    }
}

/// A command-line value: any TOML literal, otherwise a bare string.
pub fn parse_value(raw: &str) -> toml::Value {
    format!("v = {raw}")
        .parse::<toml::Table>()
        .ok()
        .and_then(|mut t| t.remove("v"))
        .unwrap_or_else(|| toml::Value::String(raw.to_string()))
}

/// Splits `--key value` / `--key=value` pairs.
pub fn parse_overrides(args: &[String]) -> Result<Vec<(String, toml::Value)>, CliError> {
    let mut out = Vec::new();
    let mut it = args.iter();
    while let Some(a) = it.next() {
        let Some(body) = a.strip_prefix("--") else {
            return Err(CliError::Config(format!("expected `--key value`, found `{a}`")));
        };
        let (key, raw) = match body.split_once('=') {
            Some((k, v)) => (k.to_string(), v.to_string()),
            None => {
                let v = it
                    .next()
                    .ok_or_else(|| CliError::Config(format!("missing value for --{body}")))?;
                (body.to_string(), v.clone())
            }
        };
        if key.is_empty() {
            return Err(CliError::Config("empty override key".into()));
        }
        out.push((key, parse_value(&raw)));
    }
    Ok(out)
}

/// Builds the typed config from dotted keys.
pub fn build(flat: &FlatConfig) -> Result<ExperimentConfig, CliError> {
    let mut root = toml::Table::new();
    for (key, value) in flat {
        let parts: Vec<&str> = key.split('.').collect();
        let mut table = &mut root;
        for part in &parts[..parts.len() - 1] {
            let entry = table
                .entry(part.to_string())
                .or_insert_with(|| toml::Value::Table(toml::Table::new()));
            table = match entry {
                toml::Value::Table(t) => t,
                _ => return Err(CliError::Config(format!("`{key}` nests under a value"))),
            };
        }
        let leaf = parts[parts.len() - 1];
        if let Some(toml::Value::Table(_)) = table.get(leaf) {
            return Err(CliError::Config(format!("`{key}` is a section, not a value")));
        }
        table.insert(leaf.to_string(), value.clone());
    }
    toml::Value::Table(root)
        .try_into()
        .map_err(|e: toml::de::Error| CliError::Config(e.message().to_string()))
}

/// File entries first, then overrides in order.
pub fn load(path: Option<&Path>, overrides: &[(String, toml::Value)]) -> Result<(ExperimentConfig, FlatConfig), CliError> {
    let mut flat = match path {
        Some(p) => read_flat(p)?,
        None => FlatConfig::new(),
    };
    for (k, v) in overrides {
        flat.insert(k.clone(), v.clone());
    }
    let cfg = build(&flat)?;
    Ok((cfg, flat))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn dotted_lines_round_trip() {
        let flat = parse_flat("sampler.h = 0.02\nsampler.method = \"ula\"\ntarget.id = \"gaussian_mixture\"\n").unwrap();
        let cfg = build(&flat).unwrap();
        assert_eq!(cfg.sampler.h, 0.02);
        assert_eq!(cfg.sampler.method, Method::Ula);
        assert_eq!(cfg.target.id, "gaussian_mixture");
        assert_eq!(cfg.sampler.n_steps, SamplerConfig::default().n_steps);
    }

    #[test]
    fn bare_strings_and_literals() {
        assert_eq!(parse_value("0.5"), toml::Value::Float(0.5));
        assert_eq!(parse_value("7"), toml::Value::Integer(7));
        assert_eq!(parse_value("ula"), toml::Value::String("ula".into()));
        assert_eq!(parse_value("[1.0, 2.0]").as_array().unwrap().len(), 2);
    }

    #[test]
    fn unknown_keys_are_rejected() {
        let flat = parse_flat("sampler.hh = 0.1").unwrap();
        assert!(build(&flat).is_err());
        let clash = parse_overrides(&["--sampler=1".into()]).unwrap();
        let mut f = parse_flat("sampler.h = 0.1").unwrap();
        f.extend(clash);
        assert!(build(&f).is_err());
    }
}

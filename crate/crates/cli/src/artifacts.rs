//! CSV persistence, manifests, and plots regenerated from CSVs.

use std::fs;
use std::path::Path;

use brwp_core::density::DiagnosticsReport;
use serde::Serialize;

use crate::config::{ExperimentConfig, FlatConfig};
use crate::svg::{self, Series};
use crate::CliError;

pub const RUN_HEADER: &str = "iter,kl,fisher,m0,tv,w2,kl_bound,wallclock_ms";
pub const HIST_BINS: usize = 40;
pub const HIST_RANGE: (f64, f64) = (-6.0, 6.0);

/// Shortest decimal that round-trips to the same `f64`.
pub fn num(v: f64) -> String {
    format!("{v:?}")
}

pub fn run_csv(rows: &[DiagnosticsReport]) -> String {
    let mut s = format!("{RUN_HEADER}\n");
    for r in rows {
        let cells = [r.kl, r.fisher, r.m0, r.tv, r.w2, r.kl_bound, r.wallclock_ms].map(num);
        s.push_str(&format!("{},{}\n", r.iter, cells.join(",")));
    }
    s
}

/// Numeric columns of a CSV, skipping `#` comment lines and the header.
pub fn read_csv(path: &Path) -> Result<(Vec<String>, Vec<Vec<f64>>), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    parse_csv(&text).map_err(|m| CliError::Config(format!("{}: {m}", path.display())))
}

pub fn parse_csv(text: &str) -> Result<(Vec<String>, Vec<Vec<f64>>), String> {
    let mut lines = text.lines().filter(|l| !l.starts_with('#') && !l.is_empty());
    let header: Vec<String> = lines.next().ok_or("empty CSV")?.split(',').map(str::to_string).collect();
    let mut cols = vec![Vec::new(); header.len()];
    for (i, line) in lines.enumerate() {
        let cells: Vec<&str> = line.split(',').collect();
        if cells.len() != header.len() {
            return Err(format!("row {} has {} cells, expected {}", i + 1, cells.len(), header.len()));
        }
        for (c, cell) in cols.iter_mut().zip(cells) {
            c.push(cell.parse::<f64>().map_err(|e| format!("row {}: `{cell}`: {e}", i + 1))?);
        }
    }
    Ok((header, cols))
}

fn column<'a>(header: &[String], cols: &'a [Vec<f64>], name: &str) -> Option<&'a [f64]> {
    header.iter().position(|h| h == name).map(|i| cols[i].as_slice())
}

pub fn write(dir: &Path, name: &str, contents: &str) -> Result<(), CliError> {
    let path = dir.join(name);
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(&path, contents).map_err(|e| CliError::io(&path, e))
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    version: &'a str,
    git_describe: &'a str,
    seed: u64,
    backend: &'a str,
    config: &'a ExperimentConfig,
    /// Dotted keys exactly as given (file, then overrides).
    config_keys: serde_json::Map<String, serde_json::Value>,
}

pub fn write_manifest(
    dir: &Path,
    command: &str,
    cfg: &ExperimentConfig,
    flat: &FlatConfig,
    seed: u64,
    backend: &str,
) -> Result<(), CliError> {
    let config_keys = flat
        .iter()
        .map(|(k, v)| (k.clone(), serde_json::to_value(v).unwrap_or(serde_json::Value::Null)))
        .collect();
    let m = Manifest {
        command,
        version: env!("CARGO_PKG_VERSION"),
        git_describe: env!("BRWP_GIT_DESCRIBE"),
        seed,
        backend,
        config: cfg,
        config_keys,
    };
    let json = serde_json::to_string_pretty(&m).expect("manifest serializes") + "\n";
    write(dir, "manifest.json", &json)
}

pub fn write_json(dir: &Path, name: &str, value: &impl Serialize) -> Result<(), CliError> {
    let json = serde_json::to_string_pretty(value).expect("report serializes") + "\n";
    write(dir, name, &json)
}

fn pairs(x: &[f64], y: &[f64]) -> Vec<(f64, f64)> {
    x.iter().copied().zip(y.iter().copied()).collect()
}

/// Rebuilds every SVG whose source CSVs are present in `dir`; returns the
/// names written.
pub fn render_plots(dir: &Path) -> Result<Vec<String>, CliError> {
    let mut written = Vec::new();
    let overlay = if dir.join("target.csv").exists() {
        let (h, c) = read_csv(&dir.join("target.csv"))?;
        (h.len() == 2).then(|| pairs(&c[0], &c[1]))
    } else {
        None
    };

    if dir.join("ensemble.csv").exists() {
        let (h, c) = read_csv(&dir.join("ensemble.csv"))?;
        let xs = column(&h, &c, "x1").unwrap_or(&[]);
        let title = format!("first coordinate, {} particles", xs.len());
        let (lo, hi) = HIST_RANGE;
        write(dir, "histogram.svg", &svg::histogram(&title, xs, lo, hi, HIST_BINS, overlay.as_deref()))?;
        written.push("histogram.svg".into());
    }

    if dir.join("run.csv").exists() {
        let (h, c) = read_csv(&dir.join("run.csv"))?;
        let it = column(&h, &c, "iter").unwrap_or(&[]);
        let mut series = vec![Series {
            label: "KL",
            points: pairs(it, column(&h, &c, "kl").unwrap_or(&[])),
            dashed: false,
        }];
        let bound = column(&h, &c, "kl_bound").unwrap_or(&[]);
        if bound.iter().any(|b| b.is_finite()) {
            series.push(Series {
                label: "KL bound",
                points: pairs(it, bound),
                dashed: true,
            });
        }
        write(dir, "kl.svg", &svg::line_plot("KL divergence", "iteration", "KL", &series, true))?;
        written.push("kl.svg".into());
    }

    if dir.join("l1.csv").exists() {
        let (h, c) = read_csv(&dir.join("l1.csv"))?;
        let it = column(&h, &c, "iter").unwrap_or(&[]);
        let series = [Series {
            label: "L1 error",
            points: pairs(it, column(&h, &c, "l1").unwrap_or(&[])),
            dashed: false,
        }];
        write(dir, "l1.svg", &svg::line_plot("L1 distance to target", "iteration", "L1", &series, true))?;
        written.push("l1.svg".into());
    }

    let densities = dir.join("densities");
    if densities.is_dir() {
        let mut names: Vec<String> = fs::read_dir(&densities)
            .map_err(|e| CliError::io(&densities, e))?
            .filter_map(|e| e.ok().map(|e| e.file_name().to_string_lossy().into_owned()))
            .filter(|n| n.ends_with(".csv"))
            .collect();
        names.sort();
        if let Some(last) = names.last() {
            let (h, c) = read_csv(&densities.join(last))?;
            if h.len() == 2 {
                let mut series = vec![Series {
                    label: "computed",
                    points: pairs(&c[0], &c[1]),
                    dashed: false,
                }];
                if let Some(o) = &overlay {
                    series.push(Series {
                        label: "target",
                        points: o.clone(),
                        dashed: true,
                    });
                }
                let title = format!("density at {}", last.trim_end_matches(".csv"));
                write(dir, "overlay.svg", &svg::line_plot(&title, "x", "density", &series, false))?;
                written.push("overlay.svg".into());
            }
        }
    }

    if dir.join("order.csv").exists() {
        let (h, c) = read_csv(&dir.join("order.csv"))?;
        let series = [Series {
            label: "error",
            points: pairs(&c[0], &c[1]),
            dashed: false,
        }];
        write(dir, "order.svg", &svg::line_plot("first-order remainder", &h[0], &h[1], &series, true))?;
        written.push("order.svg".into());
    }
    Ok(written)
}

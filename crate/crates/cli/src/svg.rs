//! Static SVG line and histogram plots.

use std::fmt::Write;

const W: f64 = 640.0;
const H: f64 = 400.0;
const LEFT: f64 = 70.0;
const RIGHT: f64 = 20.0;
const TOP: f64 = 36.0;
const BOTTOM: f64 = 50.0;
const COLORS: [&str; 6] = ["#1f77b4", "#d62728", "#2ca02c", "#ff7f0e", "#9467bd", "#8c564b"];

pub struct Series<'a> {
    pub label: &'a str,
    pub points: Vec<(f64, f64)>,
    pub dashed: bool,
}

struct Frame {
    x0: f64,
    x1: f64,
    y0: f64,
    y1: f64,
    log_y: bool,
}

impl Frame {
    fn px(&self, x: f64) -> f64 {
        LEFT + (x - self.x0) / (self.x1 - self.x0) * (W - LEFT - RIGHT)
    }

    fn py(&self, y: f64) -> f64 {
        let (y, y0, y1) = if self.log_y {
            (y.log10(), self.y0.log10(), self.y1.log10())
        } else {
            (y, self.y0, self.y1)
        };
        H - BOTTOM - (y - y0) / (y1 - y0) * (H - TOP - BOTTOM)
    }
}

fn header(title: &str) -> String {
    let mut s = String::new();
    writeln!(
        s,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{W}" height="{H}" viewBox="0 0 {W} {H}" font-family="sans-serif" font-size="12">"#
    )
    .unwrap();
    writeln!(s, r#"<rect width="{W}" height="{H}" fill="white"/>"#).unwrap();
    writeln!(s, r#"<text x="{}" y="22" text-anchor="middle" font-size="14">{}</text>"#, W / 2.0, escape(title)).unwrap();
    s
}

fn escape(t: &str) -> String {
    t.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;")
}

fn tick_label(v: f64) -> String {
    if v == 0.0 {
        "0".into()
    } else if v.abs() >= 1e4 || v.abs() < 1e-2 {
        format!("{v:.0e}")
    } else {
        let s = format!("{v:.3}");
        s.trim_end_matches('0').trim_end_matches('.').to_string()
    }
}

fn linear_ticks(lo: f64, hi: f64) -> Vec<f64> {
    let raw = (hi - lo) / 6.0;
    let mag = 10f64.powf(raw.log10().floor());
    let step = [1.0, 2.0, 5.0, 10.0].iter().map(|m| m * mag).find(|s| *s >= raw).unwrap_or(10.0 * mag);
    let mut t = (lo / step).ceil() * step;
    let mut out = Vec::new();
    while t <= hi + 1e-9 * step {
        out.push(if t.abs() < 1e-12 * step { 0.0 } else { t });
        t += step;
    }
    out
}

fn axes(s: &mut String, f: &Frame, xlabel: &str, ylabel: &str) {
    let (l, r, t, b) = (LEFT, W - RIGHT, TOP, H - BOTTOM);
    writeln!(s, r#"<rect x="{l}" y="{t}" width="{}" height="{}" fill="none" stroke="black"/>"#, r - l, b - t).unwrap();
    for x in linear_ticks(f.x0, f.x1) {
        let px = f.px(x);
        writeln!(s, r#"<line x1="{px:.2}" y1="{b}" x2="{px:.2}" y2="{}" stroke="black"/>"#, b + 5.0).unwrap();
        writeln!(s, r#"<text x="{px:.2}" y="{}" text-anchor="middle">{}</text>"#, b + 18.0, tick_label(x)).unwrap();
    }
    let yticks = if f.log_y {
        let (a, c) = (f.y0.log10().ceil() as i32, f.y1.log10().floor() as i32);
        let stride = ((c - a) / 6).max(1);
        (a..=c).step_by(stride as usize).map(|e| 10f64.powi(e)).collect()
    } else {
        linear_ticks(f.y0, f.y1)
    };
    for y in yticks {
        let py = f.py(y);
        writeln!(s, r#"<line x1="{}" y1="{py:.2}" x2="{l}" y2="{py:.2}" stroke="black"/>"#, l - 5.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{:.2}" text-anchor="end">{}</text>"#, l - 8.0, py + 4.0, tick_label(y)).unwrap();
    }
    writeln!(s, r#"<text x="{}" y="{}" text-anchor="middle">{}</text>"#, (l + r) / 2.0, H - 12.0, escape(xlabel)).unwrap();
    writeln!(
        s,
        r#"<text x="16" y="{0}" text-anchor="middle" transform="rotate(-90 16 {0})">{1}</text>"#,
        (t + b) / 2.0,
        escape(ylabel)
    )
    .unwrap();
}

fn polyline(s: &mut String, f: &Frame, pts: &[(f64, f64)], color: &str, dashed: bool) {
    let mut d = String::new();
    for &(x, y) in pts {
        if !x.is_finite() || !y.is_finite() || (f.log_y && y <= 0.0) {
            continue;
        }
        write!(d, "{:.2},{:.2} ", f.px(x), f.py(y.clamp(f.y0, f.y1))).unwrap();
    }
    let dash = if dashed { r#" stroke-dasharray="6 4""# } else { "" };
    writeln!(s, r#"<polyline points="{}" fill="none" stroke="{color}" stroke-width="1.5"{dash}/>"#, d.trim_end()).unwrap();
}

fn legend(s: &mut String, labels: &[(&str, &str, bool)]) {
    for (i, (label, color, dashed)) in labels.iter().enumerate() {
        let y = TOP + 14.0 + 16.0 * i as f64;
        let x = W - RIGHT - 150.0;
        let dash = if *dashed { r#" stroke-dasharray="6 4""# } else { "" };
        writeln!(s, r#"<line x1="{x}" y1="{y}" x2="{}" y2="{y}" stroke="{color}" stroke-width="2"{dash}/>"#, x + 24.0).unwrap();
        writeln!(s, r#"<text x="{}" y="{}">{}</text>"#, x + 30.0, y + 4.0, escape(label)).unwrap();
    }
}

/// Line plot of several series; non-positive values are dropped on a log axis.
pub fn line_plot(title: &str, xlabel: &str, ylabel: &str, series: &[Series], log_y: bool) -> String {
    let finite = |&(x, y): &(f64, f64)| x.is_finite() && y.is_finite() && (!log_y || y > 0.0);
    let all: Vec<(f64, f64)> = series.iter().flat_map(|s| s.points.iter().copied().filter(finite)).collect();
    let (mut x0, mut x1, mut y0, mut y1) = all.iter().fold(
        (f64::INFINITY, f64::NEG_INFINITY, f64::INFINITY, f64::NEG_INFINITY),
        |(a, b, c, d), &(x, y)| (a.min(x), b.max(x), c.min(y), d.max(y)),
    );
    if all.is_empty() {
        (x0, x1, y0, y1) = (0.0, 1.0, if log_y { 0.1 } else { 0.0 }, 1.0);
    }
    if x1 <= x0 {
        x1 = x0 + 1.0;
    }
    if log_y {
        y0 = 10f64.powf(y0.log10().floor());
        y1 = 10f64.powf(y1.log10().ceil());
        if y1 <= y0 {
            y1 = 10.0 * y0;
        }
    } else {
        let pad = 0.05 * (y1 - y0).max(1e-12);
        y0 -= pad;
        y1 += pad;
    }
    let f = Frame { x0, x1, y0, y1, log_y };
    let mut s = header(title);
    axes(&mut s, &f, xlabel, ylabel);
    let mut labels = Vec::new();
    for (i, ser) in series.iter().enumerate() {
        let c = COLORS[i % COLORS.len()];
        polyline(&mut s, &f, &ser.points, c, ser.dashed);
        labels.push((ser.label, c, ser.dashed));
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

/// Normalized histogram of `xs` on `[lo, hi]` with an optional density curve.
/// Samples outside the window are counted in the normalization but not drawn.
pub fn histogram(title: &str, xs: &[f64], lo: f64, hi: f64, bins: usize, overlay: Option<&[(f64, f64)]>) -> String {
    let width = (hi - lo) / bins as f64;
    let mut counts = vec![0usize; bins];
    for &x in xs {
        if x >= lo && x <= hi {
            let b = (((x - lo) / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
    }
    let n = xs.len().max(1) as f64;
    let heights: Vec<f64> = counts.iter().map(|&c| c as f64 / (n * width)).collect();
    let curve: Vec<(f64, f64)> = overlay
        .unwrap_or(&[])
        .iter()
        .copied()
        .filter(|&(x, y)| x >= lo && x <= hi && y.is_finite())
        .collect();
    let top = heights.iter().chain(curve.iter().map(|(_, y)| y)).fold(0.0f64, |a, &b| a.max(b));
    let f = Frame {
        x0: lo,
        x1: hi,
        y0: 0.0,
        y1: if top > 0.0 { 1.05 * top } else { 1.0 },
        log_y: false,
    };
    let mut s = header(title);
    for (i, &h) in heights.iter().enumerate() {
        if h == 0.0 {
            continue;
        }
        let (xa, xb) = (f.px(lo + i as f64 * width), f.px(lo + (i + 1) as f64 * width));
        let (ya, yb) = (f.py(h), f.py(0.0));
        writeln!(
            s,
            r#"<rect x="{xa:.2}" y="{ya:.2}" width="{:.2}" height="{:.2}" fill="{}" fill-opacity="0.5" stroke="{}"/>"#,
            xb - xa,
            yb - ya,
            COLORS[0],
            COLORS[0]
        )
        .unwrap();
    }
    axes(&mut s, &f, "x₁", "density");
    let mut labels = vec![("particles", COLORS[0], false)];
    if !curve.is_empty() {
        polyline(&mut s, &f, &curve, COLORS[1], false);
        labels.push(("target", COLORS[1], false));
    }
    legend(&mut s, &labels);
    s.push_str("</svg>\n");
    s
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_is_deterministic_and_closed() {
        let xs = [-1.0, 0.0, 0.1, 0.2, 7.0];
        let a = histogram("h", &xs, -6.0, 6.0, 40, None);
        assert_eq!(a, histogram("h", &xs, -6.0, 6.0, 40, None));
        assert!(a.starts_with("<svg") && a.ends_with("</svg>\n"));
        // background, frame, and two occupied bins
        assert_eq!(a.matches("<rect").count(), 4);
    }

    #[test]
    fn log_plot_skips_non_positive_points() {
        let s = Series {
            label: "kl",
            points: vec![(0.0, 1.0), (1.0, 0.0), (2.0, 1e-3)],
            dashed: false,
        };
        let out = line_plot("t", "x", "y", &[s], true);
        let poly = out.lines().find(|l| l.starts_with("<polyline")).unwrap();
        assert_eq!(poly.matches(',').count(), 2);
    }

    #[test]
    fn ticks_cover_the_range() {
        let t = linear_ticks(-6.0, 6.0);
        assert_eq!(t.first(), Some(&-6.0));
        assert_eq!(t.last(), Some(&6.0));
    }
}

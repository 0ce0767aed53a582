//! Uniform tensor grids, trapezoid quadrature and banded separable operators.
//!
//! Values on a [`Grid`] are stored row-major: the last axis varies fastest.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Largest dimension for which full tensor grids are built.
pub const MAX_GRID_DIM: usize = 3;

/// Uniform grid on `[lo, hi]` with `n` nodes (both ends included).
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Axis {
    pub lo: f64,
    pub hi: f64,
    pub n: usize,
}

impl Axis {
    pub fn new(lo: f64, hi: f64, n: usize) -> Result<Self> {
        if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
            return Err(Error::param(format!("axis bounds [{lo}, {hi}] are not an interval")));
        }
        if n < 2 {
            return Err(Error::param(format!("axis needs at least 2 nodes, got {n}")));
        }
        Ok(Axis { lo, hi, n })
    }

    pub fn spacing(&self) -> f64 {
        (self.hi - self.lo) / (self.n - 1) as f64
    }

    #[inline]
    pub fn point(&self, i: usize) -> f64 {
        if i + 1 == self.n {
            self.hi
        } else {
            self.lo + i as f64 * self.spacing()
        }
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|i| self.point(i)).collect()
    }

    #[inline]
    pub fn trapezoid_weight(&self, i: usize) -> f64 {
        let dx = self.spacing();
        if i == 0 || i + 1 == self.n {
            0.5 * dx
        } else {
            dx
        }
    }

    /// Same spacing, padded with at least `margin` on both sides.
    pub fn extended(&self, margin: f64) -> Axis {
        let dx = self.spacing();
        let extra = (margin / dx).ceil().max(0.0) as usize;
        Axis {
            lo: self.lo - extra as f64 * dx,
            hi: self.hi + extra as f64 * dx,
            n: self.n + 2 * extra,
        }
    }

    /// Fractional node coordinate of `x`, clamped into the axis.
    /// Returns `(cell, frac, clamped)`.
    #[inline]
    fn locate(&self, x: f64) -> (usize, f64, bool) {
        let t = (x - self.lo) / self.spacing();
        let last = (self.n - 1) as f64;
        let clamped = !(0.0..=last).contains(&t) || !t.is_finite();
        let t = if t.is_finite() { t.clamp(0.0, last) } else { 0.0 };
        let cell = (t.floor() as usize).min(self.n - 2);
        (cell, t - cell as f64, clamped)
    }
}

/// Tensor product of up to [`MAX_GRID_DIM`] axes.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    axes: Vec<Axis>,
}

impl Grid {
    pub fn new(axes: Vec<Axis>) -> Result<Self> {
        if axes.is_empty() || axes.len() > MAX_GRID_DIM {
            return Err(Error::param(format!(
                "tensor grids support 1..={MAX_GRID_DIM} dimensions, got {}",
                axes.len()
            )));
        }
        Ok(Grid { axes })
    }

    pub fn uniform(lo: f64, hi: f64, n: usize, dim: usize) -> Result<Self> {
        let axis = Axis::new(lo, hi, n)?;
        Grid::new(vec![axis; dim])
    }

    pub fn axes(&self) -> &[Axis] {
        &self.axes
    }

    pub fn dim(&self) -> usize {
        self.axes.len()
    }

    pub fn shape(&self) -> Vec<usize> {
        self.axes.iter().map(|a| a.n).collect()
    }

    pub fn len(&self) -> usize {
        self.axes.iter().map(|a| a.n).product()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Multi-index of a flat position.
    pub fn unravel(&self, mut flat: usize, idx: &mut [usize]) {
        for (k, axis) in self.axes.iter().enumerate().rev() {
            idx[k] = flat % axis.n;
            flat /= axis.n;
        }
    }

    pub fn point(&self, flat: usize, out: &mut [f64]) {
        let mut idx = [0usize; MAX_GRID_DIM];
        self.unravel(flat, &mut idx[..self.dim()]);
        for (k, axis) in self.axes.iter().enumerate() {
            out[k] = axis.point(idx[k]);
        }
    }

    /// All grid points, flattened `len × dim`.
    pub fn points(&self) -> Vec<f64> {
        let d = self.dim();
        let mut pts = vec![0.0; self.len() * d];
        pts.par_chunks_mut(d)
            .enumerate()
            .for_each(|(i, p)| self.point(i, p));
        pts
    }

    pub fn weight(&self, flat: usize) -> f64 {
        let mut idx = [0usize; MAX_GRID_DIM];
        self.unravel(flat, &mut idx[..self.dim()]);
        self.axes
            .iter()
            .enumerate()
            .map(|(k, a)| a.trapezoid_weight(idx[k]))
            .product()
    }

    pub fn weights(&self) -> Vec<f64> {
        (0..self.len()).map(|i| self.weight(i)).collect()
    }

    /// Trapezoid rule; summation order is fixed so results are reproducible.
    pub fn integrate(&self, values: &[f64]) -> f64 {
        debug_assert_eq!(values.len(), self.len());
        values
            .iter()
            .enumerate()
            .map(|(i, v)| v * self.weight(i))
            .sum()
    }

    /// Multilinear interpolation. The point is clamped into the grid; the
    /// flag reports whether clamping happened.
    pub fn interpolate(&self, values: &[f64], x: &[f64]) -> (f64, bool) {
        let d = self.dim();
        let mut cell = [0usize; MAX_GRID_DIM];
        let mut frac = [0.0; MAX_GRID_DIM];
        let mut clamped = false;
        for k in 0..d {
            let (c, f, cl) = self.axes[k].locate(x[k]);
            cell[k] = c;
            frac[k] = f;
            clamped |= cl;
        }
        let mut acc = 0.0;
        for corner in 0..(1usize << d) {
            let mut w = 1.0;
            let mut flat = 0usize;
            for k in 0..d {
                let up = (corner >> k) & 1;
                w *= if up == 1 { frac[k] } else { 1.0 - frac[k] };
                flat = flat * self.axes[k].n + cell[k] + up;
            }
            if w != 0.0 {
                acc += w * values[flat];
            }
        }
        (acc, clamped)
    }

    /// First partial derivative along `axis`: central differences inside,
    /// second-order one-sided stencils at the ends.
    pub fn partial(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let ax = &self.axes[axis];
        let n = ax.n;
        let dx = ax.spacing();
        map_lines(self, values, axis, |line, out| {
            if n == 2 {
                let s = (line[1] - line[0]) / dx;
                out[0] = s;
                out[1] = s;
                return;
            }
            out[0] = (-3.0 * line[0] + 4.0 * line[1] - line[2]) / (2.0 * dx);
            for i in 1..n - 1 {
                out[i] = (line[i + 1] - line[i - 1]) / (2.0 * dx);
            }
            out[n - 1] = (3.0 * line[n - 1] - 4.0 * line[n - 2] + line[n - 3]) / (2.0 * dx);
        })
    }

    /// Second partial derivative along `axis` (needs at least 4 nodes).
    pub fn second_partial(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let ax = &self.axes[axis];
        let n = ax.n;
        let dx2 = ax.spacing() * ax.spacing();
        map_lines(self, values, axis, |line, out| {
            if n < 4 {
                out.iter_mut().for_each(|o| *o = 0.0);
                return;
            }
            out[0] = (2.0 * line[0] - 5.0 * line[1] + 4.0 * line[2] - line[3]) / dx2;
            for i in 1..n - 1 {
                out[i] = (line[i - 1] - 2.0 * line[i] + line[i + 1]) / dx2;
            }
            out[n - 1] =
                (2.0 * line[n - 1] - 5.0 * line[n - 2] + 4.0 * line[n - 3] - line[n - 4]) / dx2;
        })
    }

    /// Fourth-order central first derivative; second-order within two
    /// nodes of the boundary. Needs at least 5 nodes.
    pub fn partial4(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let ax = &self.axes[axis];
        let n = ax.n;
        let dx = ax.spacing();
        if n < 5 {
            return self.partial(values, axis);
        }
        map_lines(self, values, axis, |f, out| {
            out[0] = (-3.0 * f[0] + 4.0 * f[1] - f[2]) / (2.0 * dx);
            out[1] = (f[2] - f[0]) / (2.0 * dx);
            for i in 2..n - 2 {
                out[i] = (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / (12.0 * dx);
            }
            out[n - 2] = (f[n - 1] - f[n - 3]) / (2.0 * dx);
            out[n - 1] = (3.0 * f[n - 1] - 4.0 * f[n - 2] + f[n - 3]) / (2.0 * dx);
        })
    }

    /// Fourth-order central second derivative, same boundary treatment.
    pub fn second_partial4(&self, values: &[f64], axis: usize) -> Vec<f64> {
        let ax = &self.axes[axis];
        let n = ax.n;
        let dx2 = ax.spacing() * ax.spacing();
        if n < 5 {
            return self.second_partial(values, axis);
        }
        map_lines(self, values, axis, |f, out| {
            out[0] = (2.0 * f[0] - 5.0 * f[1] + 4.0 * f[2] - f[3]) / dx2;
            out[1] = (f[0] - 2.0 * f[1] + f[2]) / dx2;
            for i in 2..n - 2 {
                out[i] = (-f[i - 2] + 16.0 * f[i - 1] - 30.0 * f[i] + 16.0 * f[i + 1] - f[i + 2])
                    / (12.0 * dx2);
            }
            out[n - 2] = (f[n - 3] - 2.0 * f[n - 2] + f[n - 1]) / dx2;
            out[n - 1] = (2.0 * f[n - 1] - 5.0 * f[n - 2] + 4.0 * f[n - 3] - f[n - 4]) / dx2;
        })
    }
}

/// Applies `f` to every 1-D line of `values` along `axis`.
fn map_lines<F>(grid: &Grid, values: &[f64], axis: usize, f: F) -> Vec<f64>
where
    F: Fn(&[f64], &mut [f64]),
{
    let shape = grid.shape();
    let n = shape[axis];
    let inner: usize = shape[axis + 1..].iter().product();
    let outer: usize = shape[..axis].iter().product();
    let mut out = vec![0.0; values.len()];
    let mut line = vec![0.0; n];
    let mut res = vec![0.0; n];
    for o in 0..outer {
        for i in 0..inner {
            let base = o * n * inner + i;
            for (k, l) in line.iter_mut().enumerate() {
                *l = values[base + k * inner];
            }
            f(&line, &mut res);
            for (k, r) in res.iter().enumerate() {
                out[base + k * inner] = *r;
            }
        }
    }
    out
}

/// Banded linear map between two axes, applied along one tensor direction.
#[derive(Clone, Debug)]
pub struct AxisOperator {
    n_in: usize,
    rows: Vec<(usize, Vec<f64>)>,
}

impl AxisOperator {
    /// Gaussian convolution `∫ N(x; y, var) f(y) dy` from `input` nodes to
    /// `output` nodes, trapezoid weights folded in. Entries whose exponent is
    /// below `-cutoff` are dropped.
    pub fn gaussian(output: &Axis, input: &Axis, var: f64, cutoff: f64) -> Self {
        let norm = (2.0 * std::f64::consts::PI * var).sqrt().recip();
        let dy = input.spacing();
        let reach = (2.0 * var * cutoff).sqrt();
        let rows = (0..output.n)
            .map(|j| {
                let x = output.point(j);
                let lo = (((x - reach - input.lo) / dy).floor().max(0.0)) as usize;
                let hi = ((((x + reach - input.lo) / dy).ceil()) as isize)
                    .clamp(0, input.n as isize - 1) as usize;
                if lo > hi || lo >= input.n {
                    return (0, Vec::new());
                }
                let w = (lo..=hi)
                    .map(|k| {
                        let r = x - input.point(k);
                        norm * input.trapezoid_weight(k) * (-0.5 * r * r / var).exp()
                    })
                    .collect();
                (lo, w)
            })
            .collect();
        AxisOperator {
            n_in: input.n,
            rows,
        }
    }

    pub fn n_out(&self) -> usize {
        self.rows.len()
    }

    /// Applies the operator along `axis` of a row-major tensor of `shape`.
    pub fn apply(&self, values: &[f64], shape: &[usize], axis: usize) -> Vec<f64> {
        assert_eq!(shape[axis], self.n_in, "operator input length mismatch");
        let inner: usize = shape[axis + 1..].iter().product();
        let outer: usize = shape[..axis].iter().product();
        let n_out = self.n_out();
        let n_in = self.n_in;
        let mut out = vec![0.0; outer * n_out * inner];
        out.par_chunks_mut(inner)
            .enumerate()
            .for_each(|(row_id, dst)| {
                let o = row_id / n_out;
                let j = row_id % n_out;
                let (start, w) = &self.rows[j];
                let src = &values[o * n_in * inner..(o + 1) * n_in * inner];
                if inner == 1 {
                    dst[0] = w
                        .iter()
                        .zip(&src[*start..*start + w.len()])
                        .map(|(a, b)| a * b)
                        .sum();
                } else {
                    for (k, wk) in w.iter().enumerate() {
                        let line = &src[(start + k) * inner..(start + k + 1) * inner];
                        for (d, s) in dst.iter_mut().zip(line) {
                            *d += wk * s;
                        }
                    }
                }
            });
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn trapezoid_integrates_quadratic_closely() {
        let g = Grid::uniform(0.0, 1.0, 1001, 1).unwrap();
        let v: Vec<f64> = g.axes()[0].points().iter().map(|x| x * x).collect();
        assert!((g.integrate(&v) - 1.0 / 3.0).abs() < 1e-6);
    }

    #[test]
    fn extended_axis_keeps_spacing() {
        let a = Axis::new(-1.0, 1.0, 201).unwrap();
        let e = a.extended(0.5);
        assert!((e.spacing() - a.spacing()).abs() < 1e-15);
        assert_eq!(e.n, 301);
        assert!((e.lo + 1.5).abs() < 1e-12);
    }

    #[test]
    fn interpolation_is_exact_for_bilinear_functions() {
        let g = Grid::uniform(-1.0, 1.0, 11, 2).unwrap();
        let pts = g.points();
        let vals: Vec<f64> = pts.chunks(2).map(|p| 1.0 + 2.0 * p[0] - p[1] + p[0] * p[1]).collect();
        let (v, clamped) = g.interpolate(&vals, &[0.13, -0.41]);
        assert!(!clamped);
        assert!((v - (1.0 + 0.26 + 0.41 - 0.13 * 0.41)).abs() < 1e-12);
        let (_, clamped) = g.interpolate(&vals, &[1.5, 0.0]);
        assert!(clamped);
    }

    #[test]
    fn partial_derivatives_are_second_order() {
        let g = Grid::uniform(0.0, 1.0, 101, 1).unwrap();
        let x = g.axes()[0].points();
        let v: Vec<f64> = x.iter().map(|t| t.powi(3)).collect();
        let d1 = g.partial(&v, 0);
        let d2 = g.second_partial(&v, 0);
        for (i, t) in x.iter().enumerate() {
            assert!((d1[i] - 3.0 * t * t).abs() < 1e-3, "d1 at {t}");
            assert!((d2[i] - 6.0 * t).abs() < 1e-2, "d2 at {t}");
        }
    }

    #[test]
    fn gaussian_operator_preserves_mass_along_each_axis() {
        let a = Axis::new(-8.0, 8.0, 321).unwrap();
        let g = Grid::new(vec![a.clone(), a.clone()]).unwrap();
        let pts = g.points();
        let vals: Vec<f64> = pts
            .chunks(2)
            .map(|p| (-(p[0] * p[0] + p[1] * p[1]) / 2.0).exp() / (2.0 * std::f64::consts::PI))
            .collect();
        let op = AxisOperator::gaussian(&a, &a, 0.3, 200.0);
        let once = op.apply(&vals, &g.shape(), 0);
        let twice = op.apply(&once, &g.shape(), 1);
        assert!((g.integrate(&twice) - 1.0).abs() < 1e-8);
        // convolved variance 1 + 0.3 per axis
        let peak = 1.0 / (2.0 * std::f64::consts::PI * 1.3);
        let centre = 160 * 321 + 160;
        assert!((twice[centre] - peak).abs() < 1e-8);
    }
}

//! Uniform x-grids with discrete t samples, matrix-valued fields on them,
//! finite-difference stencils and cumulative trapezoid quadrature.

use std::ops::{Add, Mul};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{DiagonalGenerator, SquareMatrix, C64};

/// Points skipped at each edge when residual norms are reported, so that
/// only points served by the fourth-order interior stencils count.
pub const INTERIOR_MARGIN: usize = 4;

/// Minimum number of x points; the widest interior stencil spans 7 points.
pub const MIN_NX: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Grid {
    pub x_min: f64,
    pub x_max: f64,
    pub nx: usize,
    pub t_samples: Vec<f64>,
}

impl Grid {
    pub fn new(x_min: f64, x_max: f64, nx: usize, t_samples: Vec<f64>) -> Result<Self> {
        if nx < MIN_NX {
            return Err(Error::Grid(format!(
                "nx = {nx} is below the stencil minimum {MIN_NX}"
            )));
        }
        if !(x_max > x_min) || !x_min.is_finite() || !x_max.is_finite() {
            return Err(Error::Grid(format!("invalid x range [{x_min}, {x_max}]")));
        }
        if t_samples.is_empty() {
            return Err(Error::Grid("at least one t sample is required".into()));
        }
        if t_samples.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(Error::Grid("t samples must be strictly increasing".into()));
        }
        Ok(Self {
            x_min,
            x_max,
            nx,
            t_samples,
        })
    }

    pub fn h(&self) -> f64 {
        (self.x_max - self.x_min) / (self.nx - 1) as f64
    }

    pub fn x(&self, k: usize) -> f64 {
        if k + 1 == self.nx {
            self.x_max
        } else {
            self.x_min + k as f64 * self.h()
        }
    }

    pub fn xs(&self) -> Vec<f64> {
        (0..self.nx).map(|k| self.x(k)).collect()
    }

    pub fn nt(&self) -> usize {
        self.t_samples.len()
    }

    /// Index of the t sample equal to `t` (within 1e-12).
    pub fn t_index(&self, t: f64) -> Result<usize> {
        self.t_samples
            .iter()
            .position(|&s| (s - t).abs() <= 1e-12)
            .ok_or_else(|| Error::Grid(format!("t = {t} is not a sample of the grid")))
    }

    /// Same x-grid restricted to one t sample.
    pub fn at_time(&self, t: f64) -> Self {
        Self {
            t_samples: vec![t],
            ..self.clone()
        }
    }

    /// Same x range with `nx` replaced.
    pub fn with_nx(&self, nx: usize) -> Result<Self> {
        Self::new(self.x_min, self.x_max, nx, self.t_samples.clone())
    }

    pub fn with_times(&self, t_samples: Vec<f64>) -> Result<Self> {
        Self::new(self.x_min, self.x_max, self.nx, t_samples)
    }

    /// Interior index range used for residual norms.
    pub fn interior(&self) -> std::ops::Range<usize> {
        INTERIOR_MARGIN..self.nx - INTERIOR_MARGIN
    }
}

/// Matrix-valued samples on a [`Grid`], stored t-major then x.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FieldGrid {
    pub grid: Grid,
    dim: usize,
    values: Vec<SquareMatrix>,
}

impl FieldGrid {
    pub fn new(grid: Grid, dim: usize, values: Vec<SquareMatrix>) -> Result<Self> {
        let expected = grid.nx * grid.nt();
        if values.len() != expected {
            return Err(Error::Shape {
                expected,
                found: values.len(),
            });
        }
        if let Some(bad) = values.iter().find(|m| m.dim() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: bad.dim(),
            });
        }
        Ok(Self { grid, dim, values })
    }

    pub fn zeros(grid: Grid, dim: usize) -> Self {
        let values = vec![SquareMatrix::zeros(dim); grid.nx * grid.nt()];
        Self { grid, dim, values }
    }

    /// Samples `f(x, t)` at every grid point, in parallel.
    pub fn try_from_fn<F>(grid: Grid, dim: usize, f: F) -> Result<Self>
    where
        F: Fn(f64, f64) -> Result<SquareMatrix> + Sync,
    {
        let nx = grid.nx;
        let values = (0..nx * grid.nt())
            .into_par_iter()
            .map(|idx| f(grid.x(idx % nx), grid.t_samples[idx / nx]))
            .collect::<Result<Vec<_>>>()?;
        Self::new(grid, dim, values)
    }

    /// Stacks single-time fields (same x-grid) into one field.
    pub fn stack(slices: &[FieldGrid]) -> Result<Self> {
        let first = slices
            .first()
            .ok_or_else(|| Error::Grid("cannot stack an empty list of fields".into()))?;
        let mut times = Vec::new();
        let mut values = Vec::new();
        for s in slices {
            if s.grid.nx != first.grid.nx
                || s.grid.x_min != first.grid.x_min
                || s.grid.x_max != first.grid.x_max
            {
                return Err(Error::Grid("stacked fields must share the x-grid".into()));
            }
            times.extend_from_slice(&s.grid.t_samples);
            values.extend_from_slice(&s.values);
        }
        let grid = first.grid.with_times(times)?;
        Self::new(grid, first.dim, values)
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn values(&self) -> &[SquareMatrix] {
        &self.values
    }

    pub fn slice(&self, t_index: usize) -> &[SquareMatrix] {
        let nx = self.grid.nx;
        &self.values[t_index * nx..(t_index + 1) * nx]
    }

    pub fn at(&self, t_index: usize, x_index: usize) -> &SquareMatrix {
        &self.values[t_index * self.grid.nx + x_index]
    }

    /// Single-time copy of sample `t_index`.
    pub fn time_slice(&self, t_index: usize) -> FieldGrid {
        FieldGrid {
            grid: self.grid.at_time(self.grid.t_samples[t_index]),
            dim: self.dim,
            values: self.slice(t_index).to_vec(),
        }
    }

    pub fn map<F>(&self, f: F) -> FieldGrid
    where
        F: Fn(&SquareMatrix) -> SquareMatrix + Sync + Send,
    {
        FieldGrid {
            grid: self.grid.clone(),
            dim: self.dim,
            values: self.values.par_iter().map(f).collect(),
        }
    }

    /// Largest entry modulus at the two x edges of sample `t_index`.
    pub fn edge_magnitude(&self, t_index: usize) -> f64 {
        let s = self.slice(t_index);
        s[0].max_abs().max(s[s.len() - 1].max_abs())
    }

    /// Checks that the field is a decaying off-diagonal potential: zero
    /// diagonal everywhere and edge entries below `decay`.
    pub fn check_potential(&self, j: &DiagonalGenerator, algebraic: f64, decay: f64) -> Result<()> {
        if self.dim != j.dim() {
            return Err(Error::Shape {
                expected: j.dim(),
                found: self.dim,
            });
        }
        let diag = self
            .values
            .iter()
            .map(|m| m.max_abs_diagonal())
            .fold(0.0, f64::max);
        if diag > algebraic {
            return Err(Error::Domain(format!(
                "potential must have a zero diagonal, found |P_ii| = {diag:e}"
            )));
        }
        for ti in 0..self.grid.nt() {
            let edge = self.edge_magnitude(ti);
            if !(edge < decay) {
                return Err(Error::Decay {
                    edge,
                    threshold: decay,
                });
            }
        }
        Ok(())
    }
}

fn weighted<T>(
    values: &[T],
    k: usize,
    offsets: std::ops::RangeInclusive<isize>,
    weights: &[f64],
    scale: f64,
) -> T
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut acc = T::default();
    for (off, &w) in offsets.zip(weights) {
        if w != 0.0 {
            acc = acc + values[(k as isize + off) as usize] * w;
        }
    }
    acc * scale
}

/// Derivative of order 1, 2 or 3 on a uniform grid: fourth-order central
/// stencils in the interior, second-order stencils near and at the edges.
pub fn derivative<T>(values: &[T], h: f64, order: usize) -> Result<Vec<T>>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let n = values.len();
    if n < MIN_NX {
        return Err(Error::Grid(format!(
            "derivative needs at least {MIN_NX} points, got {n}"
        )));
    }
    let v = values;
    let out = match order {
        1 => {
            let s = 1.0 / (2.0 * h);
            let s4 = 1.0 / (12.0 * h);
            (0..n)
                .map(|k| match k {
                    0 => weighted(v, k, 0..=2, &[-3.0, 4.0, -1.0], s),
                    1 => weighted(v, k, -1..=1, &[-1.0, 0.0, 1.0], s),
                    k if k == n - 2 => weighted(v, k, -1..=1, &[-1.0, 0.0, 1.0], s),
                    k if k == n - 1 => weighted(v, k, -2..=0, &[1.0, -4.0, 3.0], s),
                    _ => weighted(v, k, -2..=2, &[1.0, -8.0, 0.0, 8.0, -1.0], s4),
                })
                .collect()
        }
        2 => {
            let s = 1.0 / (h * h);
            let s4 = 1.0 / (12.0 * h * h);
            (0..n)
                .map(|k| match k {
                    0 => weighted(v, k, 0..=3, &[2.0, -5.0, 4.0, -1.0], s),
                    1 => weighted(v, k, -1..=1, &[1.0, -2.0, 1.0], s),
                    k if k == n - 2 => weighted(v, k, -1..=1, &[1.0, -2.0, 1.0], s),
                    k if k == n - 1 => weighted(v, k, -3..=0, &[-1.0, 4.0, -5.0, 2.0], s),
                    _ => weighted(v, k, -2..=2, &[-1.0, 16.0, -30.0, 16.0, -1.0], s4),
                })
                .collect()
        }
        3 => {
            let s = 1.0 / (2.0 * h * h * h);
            let s4 = 1.0 / (8.0 * h * h * h);
            (0..n)
                .map(|k| match k {
                    0 | 1 => weighted(v, k, 0..=4, &[-5.0, 18.0, -24.0, 14.0, -3.0], s),
                    2 => weighted(v, k, -2..=2, &[-1.0, 2.0, 0.0, -2.0, 1.0], s),
                    k if k == n - 3 => weighted(v, k, -2..=2, &[-1.0, 2.0, 0.0, -2.0, 1.0], s),
                    k if k >= n - 2 => weighted(v, k, -4..=0, &[3.0, -14.0, 24.0, -18.0, 5.0], s),
                    _ => weighted(v, k, -3..=3, &[1.0, -8.0, 13.0, 0.0, -13.0, 8.0, -1.0], s4),
                })
                .collect()
        }
        _ => {
            return Err(Error::Stencil(format!(
                "unsupported derivative order {order}"
            )))
        }
    };
    Ok(out)
}

/// Entrywise x-derivative of a matrix-valued slice.
pub fn derivative_matrices(
    values: &[SquareMatrix],
    h: f64,
    order: usize,
) -> Result<Vec<SquareMatrix>> {
    let n = values.first().map(|m| m.dim()).unwrap_or(0);
    let mut out = vec![SquareMatrix::zeros(n); values.len()];
    for i in 0..n {
        for j in 0..n {
            let series: Vec<C64> = values.iter().map(|m| m[(i, j)]).collect();
            let d = derivative(&series, h, order)?;
            for (o, z) in out.iter_mut().zip(d) {
                o[(i, j)] = z;
            }
        }
    }
    Ok(out)
}

/// Running trapezoid integral from the first sample, starting at zero.
pub fn cumulative_trapezoid<T>(values: &[T], h: f64) -> Vec<T>
where
    T: Copy + Default + Add<Output = T> + Mul<f64, Output = T>,
{
    let mut out = Vec::with_capacity(values.len());
    let mut acc = T::default();
    out.push(acc);
    for w in values.windows(2) {
        acc = acc + (w[0] + w[1]) * (0.5 * h);
        out.push(acc);
    }
    out.truncate(values.len());
    out
}

pub fn cumulative_trapezoid_matrices(values: &[SquareMatrix], h: f64) -> Vec<SquareMatrix> {
    let n = values.first().map(|m| m.dim()).unwrap_or(0);
    let mut out = Vec::with_capacity(values.len());
    let mut acc = SquareMatrix::zeros(n);
    out.push(acc.clone());
    for w in values.windows(2) {
        acc += &(&w[0] + &w[1]).scale(C64::new(0.5 * h, 0.0));
        out.push(acc.clone());
    }
    out.truncate(values.len());
    out
}

/// Weights `(sample index, weight)` of the three-point first derivative at
/// `t_samples[idx]`, for possibly non-uniform samples: central in the
/// interior, one-sided at the ends, two-point when only two samples exist.
pub fn time_derivative_weights(t_samples: &[f64], idx: usize) -> Result<Vec<(usize, f64)>> {
    let nt = t_samples.len();
    if nt < 2 {
        return Err(Error::Stencil(
            "a time derivative needs at least two t samples".into(),
        ));
    }
    if idx >= nt {
        return Err(Error::Stencil(format!("t index {idx} out of range")));
    }
    let t = t_samples;
    if nt == 2 {
        let d = t[1] - t[0];
        return Ok(vec![(0, -1.0 / d), (1, 1.0 / d)]);
    }
    let w = if idx == 0 {
        let (h1, h2) = (t[1] - t[0], t[2] - t[1]);
        vec![
            (0, -(2.0 * h1 + h2) / (h1 * (h1 + h2))),
            (1, (h1 + h2) / (h1 * h2)),
            (2, -h1 / (h2 * (h1 + h2))),
        ]
    } else if idx == nt - 1 {
        let (h1, h2) = (t[idx - 1] - t[idx - 2], t[idx] - t[idx - 1]);
        vec![
            (idx - 2, h2 / (h1 * (h1 + h2))),
            (idx - 1, -(h1 + h2) / (h1 * h2)),
            (idx, (2.0 * h2 + h1) / (h2 * (h1 + h2))),
        ]
    } else {
        let (h1, h2) = (t[idx] - t[idx - 1], t[idx + 1] - t[idx]);
        vec![
            (idx - 1, -h2 / (h1 * (h1 + h2))),
            (idx, (h2 - h1) / (h1 * h2)),
            (idx + 1, h1 / (h2 * (h1 + h2))),
        ]
    };
    Ok(w)
}

/// Time derivative of a field at sample `t_index`, for every x.
pub fn time_derivative(field: &FieldGrid, t_index: usize) -> Result<Vec<SquareMatrix>> {
    let weights = time_derivative_weights(&field.grid.t_samples, t_index)?;
    let nx = field.grid.nx;
    Ok((0..nx)
        .map(|k| {
            let mut acc = SquareMatrix::zeros(field.dim());
            for &(ti, w) in &weights {
                acc += &field.at(ti, k).scale(C64::new(w, 0.0));
            }
            acc
        })
        .collect())
}

/// Five-point central first derivative `(f(-2) - 8 f(-1) + 8 f(1) - f(2)) / 12 dt`.
pub fn central_five_point<T>(f_m2: T, f_m1: T, f_p1: T, f_p2: T, dt: f64) -> T
where
    T: Copy + Add<Output = T> + Mul<f64, Output = T>,
{
    (f_m2 + f_m1 * -8.0 + f_p1 * 8.0 + f_p2 * -1.0) * (1.0 / (12.0 * dt))
}

/// Least-squares slope of `ln(err)` against `ln(h)`: the observed order.
pub fn observed_order(hs: &[f64], errs: &[f64]) -> Result<f64> {
    if hs.len() != errs.len() || hs.len() < 2 {
        return Err(Error::Shape {
            expected: hs.len().max(2),
            found: errs.len(),
        });
    }
    let xs: Vec<f64> = hs.iter().map(|h| h.ln()).collect();
    let ys: Vec<f64> = errs.iter().map(|e| e.ln()).collect();
    Ok(least_squares_slope(&xs, &ys))
}

pub(crate) fn least_squares_slope(xs: &[f64], ys: &[f64]) -> f64 {
    let n = xs.len() as f64;
    let mx = xs.iter().sum::<f64>() / n;
    let my = ys.iter().sum::<f64>() / n;
    let sxy: f64 = xs.iter().zip(ys).map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = xs.iter().map(|x| (x - mx) * (x - mx)).sum();
    sxy / sxx
}

/// Fitted rate `r` of `d(x) ~ e^{r x}` from samples with `d > floor`.
/// Returns `None` when fewer than three samples survive the floor.
pub fn fit_exponential_rate(xs: &[f64], ds: &[f64], floor: f64) -> Option<f64> {
    let (fx, fy): (Vec<f64>, Vec<f64>) = xs
        .iter()
        .zip(ds)
        .filter(|(_, &d)| d > floor && d.is_finite())
        .map(|(&x, &d)| (x, d.ln()))
        .unzip();
    (fx.len() >= 3).then(|| least_squares_slope(&fx, &fy))
}

//! Coefficients `V_0..V_n` of the time part of the Lax pair, built from a
//! potential by the off-diagonal / diagonal recurrence, plus the residual
//! evaluators used to verify them.
//!
//! Starting from `V_n^off = 0`, each level fixes
//!
//! ```text
//! V_i^diag(x) = α_i + f_i J x + ∫_{x_min}^x π0([P, V_i^off]) dx
//! V_{i-1}^off = ad_J^{-1}( ∂x V_i^off - π1([P, V_i]) )
//! ```
//!
//! and descends to `i = 0`.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{SpectralPath, SpectralPolynomial};
use crate::grid::{
    cumulative_trapezoid_matrices, derivative_matrices, fit_exponential_rate, time_derivative,
    FieldGrid,
};
use crate::matrix::{adj_inverse_with, DiagonalGenerator, SquareMatrix, C64, ZERO};
use crate::tolerances::Tolerances;

/// Integral constants `α_0..α_n`, one trace-free matrix per level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IntegralConstants {
    alphas: Vec<SquareMatrix>,
}

impl IntegralConstants {
    pub fn new(alphas: Vec<SquareMatrix>) -> Result<Self> {
        Self::with_tolerance(alphas, Tolerances::default().algebraic)
    }

    pub fn with_tolerance(alphas: Vec<SquareMatrix>, tol: f64) -> Result<Self> {
        let first = alphas.first().ok_or_else(|| {
            Error::Domain("at least one integral constant (alpha_0) is required".into())
        })?;
        let dim = first.dim();
        for (i, a) in alphas.iter().enumerate() {
            if a.dim() != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: a.dim(),
                });
            }
            let tr = a.trace().norm();
            if tr > tol {
                return Err(Error::Domain(format!(
                    "alpha_{i} must be trace free, |trace| = {tr:e}"
                )));
            }
        }
        Ok(Self { alphas })
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        Self {
            alphas: vec![SquareMatrix::zeros(dim); order + 1],
        }
    }

    /// Constants from diagonal entries; `diagonals[i]` holds `α_i`.
    pub fn from_diagonals(diagonals: &[Vec<C64>]) -> Result<Self> {
        Self::new(
            diagonals
                .iter()
                .map(|d| SquareMatrix::from_diag(d))
                .collect(),
        )
    }

    /// Hierarchy order `n`.
    pub fn order(&self) -> usize {
        self.alphas.len() - 1
    }

    pub fn dim(&self) -> usize {
        self.alphas[0].dim()
    }

    pub fn alphas(&self) -> &[SquareMatrix] {
        &self.alphas
    }

    pub fn get(&self, i: usize) -> &SquareMatrix {
        &self.alphas[i]
    }
}

/// `V_0..V_n` sampled at one time on the x-grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HierarchyFields {
    /// `vs[i]` is `V_i` as a single-time field.
    pub vs: Vec<FieldGrid>,
    pub constants: IntegralConstants,
    pub flow: SpectralPolynomial,
    pub generator: DiagonalGenerator,
    pub t: f64,
}

impl HierarchyFields {
    pub fn order(&self) -> usize {
        self.vs.len() - 1
    }

    /// `V_i` at x index `k`.
    pub fn v(&self, i: usize, k: usize) -> &SquareMatrix {
        self.vs[i].at(0, k)
    }

    /// All coefficients at x index `k`.
    pub fn coefficients_at(&self, k: usize) -> Vec<SquareMatrix> {
        self.vs.iter().map(|v| v.at(0, k).clone()).collect()
    }

    /// `V(λ) = Σ V_i λ^i` at x index `k`.
    pub fn eval_at(&self, k: usize, lambda: C64) -> SquareMatrix {
        eval_matrix_poly(&self.coefficients_at(k), lambda)
    }
}

/// `Σ_i m_i λ^i` by Horner's rule.
pub fn eval_matrix_poly(coeffs: &[SquareMatrix], lambda: C64) -> SquareMatrix {
    let n = coeffs[0].dim();
    coeffs
        .iter()
        .rev()
        .fold(SquareMatrix::zeros(n), |acc, c| &acc.scale(lambda) + c)
}

/// Builds `V_0..V_n` at time `t` from the potential sample at that time.
pub fn build_hierarchy(
    p: &FieldGrid,
    j: &DiagonalGenerator,
    f: &SpectralPolynomial,
    c: &IntegralConstants,
    t: f64,
) -> Result<HierarchyFields> {
    build_hierarchy_with(p, j, f, c, t, &Tolerances::default())
}

pub fn build_hierarchy_with(
    p: &FieldGrid,
    j: &DiagonalGenerator,
    f: &SpectralPolynomial,
    c: &IntegralConstants,
    t: f64,
    tol: &Tolerances,
) -> Result<HierarchyFields> {
    let ti = p.grid.t_index(t)?;
    let slice = p.time_slice(ti);
    slice.check_potential(j, tol.algebraic, tol.decay)?;
    if c.dim() != j.dim() {
        return Err(Error::Shape {
            expected: j.dim(),
            found: c.dim(),
        });
    }
    let n = c.order();
    if let Some(d) = f.degree() {
        if d > n {
            return Err(Error::Domain(format!(
                "hierarchy of order {n} needs deg f <= {n}, got {d}"
            )));
        }
    }
    for (i, a) in c.alphas().iter().enumerate() {
        if a.max_abs_off_diagonal() > tol.algebraic {
            return Err(Error::Domain(format!("alpha_{i} must be diagonal")));
        }
    }

    let grid = &slice.grid;
    let h = grid.h();
    let xs = grid.xs();
    let pv = slice.values();
    let jm = j.matrix();
    let dim = j.dim();

    let mut vs: Vec<Vec<SquareMatrix>> = vec![Vec::new(); n + 1];
    let mut off = vec![SquareMatrix::zeros(dim); grid.nx];
    for i in (0..=n).rev() {
        let integrand: Vec<SquareMatrix> = pv
            .par_iter()
            .zip(off.par_iter())
            .map(|(pk, vk)| SquareMatrix::from_diag(&pk.bracket(vk).diagonal()))
            .collect();
        let cum = cumulative_trapezoid_matrices(&integrand, h);
        let fi = f.coeff(i);
        let level: Vec<SquareMatrix> = (0..grid.nx)
            .into_par_iter()
            .map(|k| {
                let mut v = c.get(i).clone();
                v += &jm.scale(fi * xs[k]);
                v += &cum[k];
                v += &off[k];
                v
            })
            .collect();
        if i > 0 {
            let d_off = derivative_matrices(&off, h, 1)?;
            off = (0..grid.nx)
                .into_par_iter()
                .map(|k| {
                    let mut y = pv[k].bracket(&level[k]);
                    for d in 0..dim {
                        y[(d, d)] = ZERO;
                    }
                    let rhs = &d_off[k] - &y;
                    adj_inverse_with(&rhs, j, tol.algebraic.max(1e-9 * rhs.max_abs()))
                })
                .collect::<Result<Vec<_>>>()?;
        }
        vs[i] = level;
    }

    let vs = vs
        .into_iter()
        .map(|values| FieldGrid::new(grid.clone(), dim, values))
        .collect::<Result<Vec<_>>>()?;
    Ok(HierarchyFields {
        vs,
        constants: c.clone(),
        flow: f.clone(),
        generator: j.clone(),
        t,
    })
}

/// Max-entry norm of `U_t - V_x + [U, V]` over interior points and the
/// given spectral samples, with `U = λJ + P`, `V = Σ V_i λ^i` and
/// `U_t = f(λ) J + P_t`.
pub fn zero_curvature_residual(
    p: &FieldGrid,
    hf: &HierarchyFields,
    lambda_samples: &[SpectralPath],
    t_index: usize,
) -> Result<f64> {
    if p.grid.nt() < 2 {
        return Err(Error::Stencil(
            "zero-curvature residual needs at least two t samples".into(),
        ));
    }
    let t = p.grid.t_samples[t_index];
    if (hf.t - t).abs() > 1e-12 {
        return Err(Error::Grid(format!(
            "hierarchy is sampled at t = {}, residual requested at t = {t}",
            hf.t
        )));
    }
    if hf.vs[0].grid.nx != p.grid.nx {
        return Err(Error::Shape {
            expected: p.grid.nx,
            found: hf.vs[0].grid.nx,
        });
    }
    let h = p.grid.h();
    let p_t = time_derivative(p, t_index)?;
    let dvs = hf
        .vs
        .iter()
        .map(|v| derivative_matrices(v.slice(0), h, 1))
        .collect::<Result<Vec<_>>>()?;
    let jm = hf.generator.matrix();
    let lambdas = lambda_samples
        .iter()
        .map(|path| path.at(t))
        .collect::<Result<Vec<_>>>()?;
    let pk = p.slice(t_index);

    let worst = p
        .grid
        .interior()
        .into_par_iter()
        .map(|k| {
            let coeffs = hf.coefficients_at(k);
            let dcoeffs: Vec<SquareMatrix> = dvs.iter().map(|d| d[k].clone()).collect();
            lambdas
                .iter()
                .map(|&lam| {
                    let v = eval_matrix_poly(&coeffs, lam);
                    let vx = eval_matrix_poly(&dcoeffs, lam);
                    let u = &jm.scale(lam) + &pk[k];
                    let mut r = jm.scale(hf.flow.eval(lam));
                    r += &p_t[k];
                    r = &r - &vx;
                    r += &u.bracket(&v);
                    r.max_abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Max-entry norm over interior points of the level relations
/// `f_i J - V_{i,x} + [J, V_{i-1}] + [P, V_i]` for `1 <= i <= n`, with
/// `V_{i,x}` from the fourth-order interior stencil.
pub fn recurrence_residual(p: &FieldGrid, hf: &HierarchyFields) -> Result<f64> {
    if hf.vs[0].grid.nx != p.grid.nx {
        return Err(Error::Shape {
            expected: p.grid.nx,
            found: hf.vs[0].grid.nx,
        });
    }
    let ti = p.grid.t_index(hf.t)?;
    let h = p.grid.h();
    let dvs = hf
        .vs
        .iter()
        .map(|v| derivative_matrices(v.slice(0), h, 1))
        .collect::<Result<Vec<_>>>()?;
    let jm = hf.generator.matrix();
    let pk = p.slice(ti);
    let worst = p
        .grid
        .interior()
        .into_par_iter()
        .map(|k| {
            (1..=hf.order())
                .map(|i| {
                    let mut r = jm.scale(hf.flow.coeff(i));
                    r = &r - &dvs[i][k];
                    r += &jm.bracket(hf.v(i - 1, k));
                    r += &pk[k].bracket(hf.v(i, k));
                    r.max_abs()
                })
                .fold(0.0, f64::max)
        })
        .reduce(|| 0.0, f64::max);
    Ok(worst)
}

/// Max-entry sizes of the terms of `P_t - V_{0,x}^off + [P, V_0^diag]`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvolutionTerms {
    pub p_t: f64,
    pub v0x_off: f64,
    pub bracket: f64,
    pub residual: f64,
}

/// Residual of the evolution law for `P` over interior t samples and
/// interior x points. `hfs` must contain the hierarchy at every interior
/// t sample of `p`.
pub fn evolution_residual(p: &FieldGrid, hfs: &[HierarchyFields]) -> Result<f64> {
    Ok(evolution_terms(p, hfs)?.residual)
}

pub fn evolution_terms(p: &FieldGrid, hfs: &[HierarchyFields]) -> Result<EvolutionTerms> {
    let nt = p.grid.nt();
    if nt < 3 {
        return Err(Error::Stencil(format!(
            "evolution residual needs at least three t samples, got {nt}"
        )));
    }
    let h = p.grid.h();
    let mut terms = EvolutionTerms {
        p_t: 0.0,
        v0x_off: 0.0,
        bracket: 0.0,
        residual: 0.0,
    };
    for ti in 1..nt - 1 {
        let t = p.grid.t_samples[ti];
        let hf = hfs
            .iter()
            .find(|hf| (hf.t - t).abs() <= 1e-12)
            .ok_or_else(|| Error::Grid(format!("no hierarchy supplied for t = {t}")))?;
        let p_t = time_derivative(p, ti)?;
        let v0 = hf.vs[0].slice(0);
        let v0_off: Vec<SquareMatrix> = v0
            .iter()
            .map(|m| {
                let mut o = m.clone();
                for d in 0..o.dim() {
                    o[(d, d)] = ZERO;
                }
                o
            })
            .collect();
        let dv0 = derivative_matrices(&v0_off, h, 1)?;
        let pk = p.slice(ti);
        for k in p.grid.interior() {
            let vdiag = SquareMatrix::from_diag(&v0[k].diagonal());
            let br = pk[k].bracket(&vdiag);
            let r = &(&p_t[k] - &dv0[k]) + &br;
            terms.p_t = terms.p_t.max(p_t[k].max_abs());
            terms.v0x_off = terms.v0x_off.max(dv0[k].max_abs());
            terms.bracket = terms.bracket.max(br.max_abs());
            terms.residual = terms.residual.max(r.max_abs());
        }
    }
    Ok(terms)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LevelAsymptotics {
    pub level: usize,
    /// `max |V_i(x_min) - f_i J x_min - α_i|`.
    pub edge_deviation: f64,
    /// `V_i(x_min) - f_i J x_min`: the constant read off the left edge.
    pub recovered: SquareMatrix,
    /// Rate `r` of the fit `deviation ~ e^{r x}` on the leftmost quarter.
    pub decay_rate: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AsymptoticReport {
    pub t: f64,
    pub levels: Vec<LevelAsymptotics>,
}

impl AsymptoticReport {
    pub fn max_edge_deviation(&self) -> f64 {
        self.levels
            .iter()
            .map(|l| l.edge_deviation)
            .fold(0.0, f64::max)
    }
}

/// Left-edge diagnostic of `V_i - f_i J x - α_i → 0` as `x → -∞`.
pub fn asymptotic_check(hf: &HierarchyFields) -> AsymptoticReport {
    let grid = &hf.vs[0].grid;
    let jm = hf.generator.matrix();
    let quarter = (grid.nx / 4).max(3);
    let xs: Vec<f64> = (0..quarter).map(|k| grid.x(k)).collect();
    let levels = hf
        .vs
        .iter()
        .enumerate()
        .map(|(i, v)| {
            let fi = hf.flow.coeff(i);
            let alpha = hf.constants.get(i);
            let deviation =
                |k: usize| -> SquareMatrix { &(v.at(0, k) - &jm.scale(fi * grid.x(k))) - alpha };
            let ds: Vec<f64> = (0..quarter).map(|k| deviation(k).max_abs()).collect();
            let scale = (0..quarter)
                .map(|k| v.at(0, k).max_abs())
                .fold(0.0, f64::max);
            let floor = 1e3 * f64::EPSILON * (1.0 + scale);
            LevelAsymptotics {
                level: i,
                edge_deviation: ds[0],
                recovered: v.at(0, 0) - &jm.scale(fi * grid.x(0)),
                decay_rate: fit_exponential_rate(&xs, &ds, floor),
            }
        })
        .collect();
    AsymptoticReport { t: hf.t, levels }
}

/// `J` scaled by a real number, as used for constants such as `-4J`.
pub fn scaled_generator(j: &DiagonalGenerator, c: f64) -> SquareMatrix {
    j.matrix().scale(C64::new(c, 0.0))
}

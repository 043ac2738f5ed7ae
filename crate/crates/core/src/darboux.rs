//! Darboux dressing of a solution `(P, V)` by a frame of eigenfunctions.
//!
//! A frame `H = [h_1 .. h_N]` of eigenfunction columns at spectral values
//! `λ_1(t) .. λ_N(t)` gives the dressing field `S = H Λ H⁻¹`. The dressed
//! solution is `P' = P + [J, S]` together with coefficients `V'_i` fixed by
//!
//! ```text
//! V'(λ)(λ - S) = (λ - S) V(λ) + (f(λ) - S_t) - g(λ)(λ - S)
//! ```
//!
//! and the integral constants move by `β_j(Λ)`.

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::flow::{compute_g, perm_extremes, GPolynomial, SpectralPath, SpectralPolynomial};
use crate::grid::{central_five_point, fit_exponential_rate, least_squares_slope, FieldGrid, Grid};
use crate::hierarchy::{build_hierarchy_with, HierarchyFields, IntegralConstants};
use crate::matrix::{det, invert_with, DiagonalGenerator, SquareMatrix, C64, ONE, ZERO};
use crate::tolerances::Tolerances;

/// Fundamental matrix `Φ(x)` at a fixed `t` and spectral value.
pub type Evaluator<'a> = Box<dyn Fn(f64) -> Result<SquareMatrix> + Send + Sync + 'a>;

/// A source of fundamental solutions `Φ(x, t, λ(t))` of the Lax pair.
pub trait Eigenfunctions: Send + Sync {
    fn dim(&self) -> usize;

    /// Returns `x ↦ Φ(x, t, λ(t))` for the spectral path `path`.
    fn at<'a>(&'a self, t: f64, path: &SpectralPath) -> Result<Evaluator<'a>>;
}

/// `H Λ H⁻¹` with `Λ = diag(lambdas)`.
pub fn build_s(h: &SquareMatrix, lambdas: &[C64]) -> Result<SquareMatrix> {
    build_s_with(h, lambdas, Tolerances::default().singular)
}

pub fn build_s_with(h: &SquareMatrix, lambdas: &[C64], singular: f64) -> Result<SquareMatrix> {
    if lambdas.len() != h.dim() {
        return Err(Error::Shape {
            expected: h.dim(),
            found: lambdas.len(),
        });
    }
    let inv = invert_with(h, singular)?;
    let mut hl = h.clone();
    for i in 0..h.dim() {
        for k in 0..h.dim() {
            hl[(i, k)] *= lambdas[k];
        }
    }
    Ok(hl.matmul(&inv))
}

/// `P + [J, S]`.
pub fn transform_p(
    p: &SquareMatrix,
    j: &DiagonalGenerator,
    s: &SquareMatrix,
) -> Result<SquareMatrix> {
    for m in [p, s] {
        if m.dim() != j.dim() {
            return Err(Error::Shape {
                expected: j.dim(),
                found: m.dim(),
            });
        }
    }
    if p.max_abs_diagonal() > Tolerances::default().algebraic {
        return Err(Error::Domain("potential must be off-diagonal".into()));
    }
    Ok(p + &j.ad(s))
}

/// Dressed coefficients `V'_0 .. V'_n` from `V_0 .. V_n`.
///
/// Evaluated top down by `V'_n = V_n + f_{n+2} S + (f_{n+1} - g_n)` and
/// `V'_{k-1} = V'_k S + V_{k-1} - S V_k + (f_k - g_{k-1}) + g_k S`.
pub fn transform_v(
    vs: &[SquareMatrix],
    s: &SquareMatrix,
    f: &SpectralPolynomial,
    g: &GPolynomial,
) -> Result<Vec<SquareMatrix>> {
    let n = vs.len().checked_sub(1).ok_or(Error::Shape {
        expected: 1,
        found: 0,
    })?;
    let dim = s.dim();
    if let Some(bad) = vs.iter().find(|v| v.dim() != dim) {
        return Err(Error::Shape {
            expected: dim,
            found: bad.dim(),
        });
    }
    f.check_order(n)?;
    if (n + 2..g.coeffs.len()).any(|i| g.coeff(i) != ZERO) {
        return Err(Error::Domain(format!(
            "g must have degree at most {}",
            n + 1
        )));
    }
    let mut out = vec![SquareMatrix::zeros(dim); n + 1];
    let mut top = vs[n].add_scalar(f.coeff(n + 1) - g.coeff(n));
    top += &s.scale(f.coeff(n + 2));
    out[n] = top;
    for k in (1..=n).rev() {
        let mut v = out[k].matmul(s);
        v += &vs[k - 1];
        v = &v - &s.matmul(&vs[k]);
        v = v.add_scalar(f.coeff(k) - g.coeff(k - 1));
        v += &s.scale(g.coeff(k));
        out[k - 1] = v;
    }
    Ok(out)
}

/// Max-entry norm of
/// `V'(λ)(λ - S) - (λ - S)V(λ) - (f(λ) - S_t) + g(λ)(λ - S)`.
pub fn governing_relation_residual(
    vs: &[SquareMatrix],
    vps: &[SquareMatrix],
    s: &SquareMatrix,
    s_t: &SquareMatrix,
    f: &SpectralPolynomial,
    g: &GPolynomial,
    lambda: C64,
) -> f64 {
    let v = crate::hierarchy::eval_matrix_poly(vs, lambda);
    let vp = crate::hierarchy::eval_matrix_poly(vps, lambda);
    let factor = (-s).add_scalar(lambda);
    let mut r = vp.matmul(&factor);
    r = &r - &factor.matmul(&v);
    r = &r - &(-s_t).add_scalar(f.eval(lambda));
    r += &factor.scale(g.eval(lambda));
    r.max_abs()
}

/// Integral-constant shift `β_0 .. β_n` produced by one dressing step.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConstantShift {
    pub betas: Vec<SquareMatrix>,
}

impl ConstantShift {
    pub fn order(&self) -> usize {
        self.betas.len() - 1
    }

    pub fn zeros(order: usize, dim: usize) -> Self {
        Self {
            betas: vec![SquareMatrix::zeros(dim); order + 1],
        }
    }
}

/// `β_j = Σ_{k=0}^{n-j+1} f_{j+k+1} Λ^k - g_j` for `0 <= j <= n`.
pub fn beta_shift(
    f: &SpectralPolynomial,
    lambda_diag: &SquareMatrix,
    g: &GPolynomial,
    n: usize,
) -> Result<ConstantShift> {
    if lambda_diag.max_abs_off_diagonal() > 0.0 {
        return Err(Error::Domain("Λ must be diagonal".into()));
    }
    let dim = lambda_diag.dim();
    let betas = (0..=n)
        .map(|j| {
            let mut beta = SquareMatrix::scalar(dim, -g.coeff(j));
            let mut power = SquareMatrix::identity(dim);
            for k in 0..=(n - j + 1) {
                beta += &power.scale(f.coeff(j + k + 1));
                power = power.matmul(lambda_diag);
            }
            beta
        })
        .collect();
    Ok(ConstantShift { betas })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum ShiftDirection {
    Forward,
    Inverse,
}

/// `α ± β` componentwise.
pub fn shift_constants(
    c: &IntegralConstants,
    shift: &ConstantShift,
    direction: ShiftDirection,
) -> Result<IntegralConstants> {
    if c.order() != shift.order() {
        return Err(Error::Shape {
            expected: c.order(),
            found: shift.order(),
        });
    }
    let alphas = c
        .alphas()
        .iter()
        .zip(&shift.betas)
        .map(|(a, b)| match direction {
            ShiftDirection::Forward => a + b,
            ShiftDirection::Inverse => a - b,
        })
        .collect();
    IntegralConstants::with_tolerance(alphas, 1e-9)
}

fn check_not_degenerate(lam: C64, spectrum: &[C64], tol: f64) -> Result<()> {
    for &e in spectrum {
        let distance = (lam - e).norm();
        if distance <= tol {
            return Err(Error::DegenerateDressing {
                lambda: lam,
                eigenvalue: e,
                distance,
            });
        }
    }
    Ok(())
}

/// `p(λ)(λ - S) Φ` where `p(λ)` is the principal N-th root of
/// `1 / det(λ - S)`. `spectrum` is the eigenvalue list of `S`.
pub fn transform_eigenfunction(
    phi: &SquareMatrix,
    lam: C64,
    s: &SquareMatrix,
    spectrum: &[C64],
) -> Result<SquareMatrix> {
    transform_eigenfunction_with(phi, lam, s, spectrum, Tolerances::default().degenerate)
}

pub fn transform_eigenfunction_with(
    phi: &SquareMatrix,
    lam: C64,
    s: &SquareMatrix,
    spectrum: &[C64],
    degenerate: f64,
) -> Result<SquareMatrix> {
    if phi.dim() != s.dim() {
        return Err(Error::Shape {
            expected: s.dim(),
            found: phi.dim(),
        });
    }
    if spectrum.len() != s.dim() {
        return Err(Error::Shape {
            expected: s.dim(),
            found: spectrum.len(),
        });
    }
    check_not_degenerate(lam, spectrum, degenerate)?;
    let factor = (-s).add_scalar(lam);
    let p = dressing_normalization(lam, spectrum);
    Ok(factor.matmul(phi).scale(p))
}

/// Column form of [`transform_eigenfunction`].
pub fn transform_column(
    phi: &[C64],
    lam: C64,
    s: &SquareMatrix,
    spectrum: &[C64],
) -> Result<Vec<C64>> {
    if phi.len() != s.dim() {
        return Err(Error::Shape {
            expected: s.dim(),
            found: phi.len(),
        });
    }
    if spectrum.len() != s.dim() {
        return Err(Error::Shape {
            expected: s.dim(),
            found: spectrum.len(),
        });
    }
    check_not_degenerate(lam, spectrum, Tolerances::default().degenerate)?;
    let factor = (-s).add_scalar(lam);
    let p = dressing_normalization(lam, spectrum);
    Ok(factor.matvec(phi).into_iter().map(|z| z * p).collect())
}

/// `det(λ - S)` is taken as `Π (λ - λ_k)` so the branch of the root does
/// not follow rounding noise in x.
fn dressing_normalization(lam: C64, spectrum: &[C64]) -> C64 {
    let n = spectrum.len() as f64;
    let d: C64 = spectrum.iter().map(|&e| lam - e).product();
    (ONE / d).powf(1.0 / n)
}

/// `(dp/dt) / p = -g(λ)`, the only way `p(λ)` enters the dressed coefficients.
pub fn log_p_derivative(g: &GPolynomial, lambda: C64) -> C64 {
    -g.eval(lambda)
}

/// `-(1/N) d/dt log det(λ(t) - S(t))` by a five-point difference of the
/// determinant, for comparison with [`log_p_derivative`].
pub fn log_p_derivative_numeric<F>(path: &SpectralPath, s_at: F, t: f64, dt: f64) -> Result<C64>
where
    F: Fn(f64) -> Result<SquareMatrix>,
{
    let d = |tau: f64| -> Result<C64> {
        let s = s_at(tau)?;
        Ok(det(&(-&s).add_scalar(path.at(tau)?)))
    };
    let n = s_at(t)?.dim() as f64;
    let deriv = central_five_point(
        d(t - 2.0 * dt)?,
        d(t - dt)?,
        d(t + dt)?,
        d(t + 2.0 * dt)?,
        dt,
    );
    Ok(-deriv / (d(t)? * n))
}

/// Min over `j < k` of `|Re(λ (J_j - J_k))|`; zero on `Γ_J`.
pub fn gamma_distance(lambda: C64, j: &DiagonalGenerator) -> f64 {
    let e = j.entries();
    let mut best = f64::INFINITY;
    for a in 0..e.len() {
        for b in a + 1..e.len() {
            best = best.min((lambda * (e[a] - e[b])).re.abs());
        }
    }
    best
}

/// A frame `H` and dressing field `S = H Λ H⁻¹` sampled on a grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DarbouxFrame {
    pub lambdas: Vec<SpectralPath>,
    pub mixing: Vec<Vec<C64>>,
    pub h_field: FieldGrid,
    pub s_field: FieldGrid,
    pub generator: DiagonalGenerator,
}

impl DarbouxFrame {
    /// Assembles `h_k(x, t) = Φ(x, t, λ_k(t)) mixing_k` at every grid point
    /// and validates the frame.
    pub fn build(
        source: &dyn Eigenfunctions,
        generator: &DiagonalGenerator,
        lambdas: Vec<SpectralPath>,
        mixing: Vec<Vec<C64>>,
        grid: &Grid,
        tol: &Tolerances,
    ) -> Result<Self> {
        let dim = generator.dim();
        if source.dim() != dim {
            return Err(Error::Shape {
                expected: dim,
                found: source.dim(),
            });
        }
        for list_len in [lambdas.len(), mixing.len()] {
            if list_len != dim {
                return Err(Error::Shape {
                    expected: dim,
                    found: list_len,
                });
            }
        }
        if let Some(bad) = mixing.iter().find(|m| m.len() != dim) {
            return Err(Error::Shape {
                expected: dim,
                found: bad.len(),
            });
        }

        let mut hs = Vec::with_capacity(grid.nx * grid.nt());
        let mut ss = Vec::with_capacity(grid.nx * grid.nt());
        for &t in &grid.t_samples {
            let spectrum = lambdas
                .iter()
                .map(|p| p.at(t))
                .collect::<Result<Vec<_>>>()?;
            for &lam in &spectrum {
                let d = gamma_distance(lam, generator);
                if d <= tol.algebraic {
                    return Err(Error::Domain(format!(
                        "λ = {lam} lies on Γ_J at t = {t} (distance {d:e})"
                    )));
                }
            }
            let evals = lambdas
                .iter()
                .map(|p| source.at(t, p))
                .collect::<Result<Vec<_>>>()?;
            let target = char_poly_of_roots(&spectrum);
            let rows = (0..grid.nx)
                .into_par_iter()
                .map(|k| {
                    let x = grid.x(k);
                    let cols = evals
                        .iter()
                        .zip(&mixing)
                        .map(|(e, m)| Ok(e(x)?.matvec(m)))
                        .collect::<Result<Vec<_>>>()?;
                    let h = SquareMatrix::from_columns(&cols)?;
                    let s = build_s_with(&h, &spectrum, tol.singular)?;
                    let cp = s.char_poly();
                    let scale = 1.0 + target.iter().map(|c| c.norm()).fold(0.0, f64::max);
                    let err = cp.iter().zip(&target).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
                    if !(err <= tol.spectrum * scale) {
                        return Err(Error::Domain(format!(
                            "spectrum of S drifts from the prescribed values by {err:e} at x = {x}, t = {t}"
                        )));
                    }
                    Ok((h, s))
                })
                .collect::<Result<Vec<_>>>()?;
            let (h_t, s_t): (Vec<_>, Vec<_>) = rows.into_iter().unzip();
            check_dominance(generator, &spectrum, grid, &h_t, tol.dominance, t)?;
            hs.extend(h_t);
            ss.extend(s_t);
        }
        Ok(Self {
            lambdas,
            mixing,
            h_field: FieldGrid::new(grid.clone(), dim, hs)?,
            s_field: FieldGrid::new(grid.clone(), dim, ss)?,
            generator: generator.clone(),
        })
    }

    pub fn grid(&self) -> &Grid {
        &self.s_field.grid
    }

    pub fn spectrum_at(&self, t: f64) -> Result<Vec<C64>> {
        self.lambdas.iter().map(|p| p.at(t)).collect()
    }

    pub fn lambda_diag(&self, t: f64) -> Result<SquareMatrix> {
        Ok(SquareMatrix::from_diag(&self.spectrum_at(t)?))
    }

    pub fn g(&self, f: &SpectralPolynomial, t: f64) -> Result<GPolynomial> {
        compute_g(f, &self.spectrum_at(t)?, self.generator.dim())
    }

    /// `β(Λ(t))` for a hierarchy of order `n` with flow `f`.
    pub fn shift(&self, f: &SpectralPolynomial, n: usize, t: f64) -> Result<ConstantShift> {
        beta_shift(f, &self.lambda_diag(t)?, &self.g(f, t)?, n)
    }

    /// `S` at time sample `t_index` as a single-time slice.
    pub fn s_slice(&self, t_index: usize) -> &[SquareMatrix] {
        self.s_field.slice(t_index)
    }
}

/// Coefficients of `Π (λ - r_k)`, ascending and monic.
pub fn char_poly_of_roots(roots: &[C64]) -> Vec<C64> {
    let mut c = vec![ONE];
    for &r in roots {
        let mut next = vec![ZERO; c.len() + 1];
        for (i, &a) in c.iter().enumerate() {
            next[i + 1] += a;
            next[i] -= a * r;
        }
        c = next;
    }
    c
}

/// Checks that `log|det H|` grows at the edge rates `m` (left) and `M`
/// (right). Only meaningful for real `J` and real spectra.
fn check_dominance(
    j: &DiagonalGenerator,
    spectrum: &[C64],
    grid: &Grid,
    hs: &[SquareMatrix],
    dominance: f64,
    t: f64,
) -> Result<()> {
    let Some((m, big_m)) = real_extremes(j, spectrum)? else {
        return Ok(());
    };
    let quarter = (grid.nx / 4).max(3);
    let logs: Vec<f64> = hs.iter().map(|h| det(h).norm().ln()).collect();
    let xs = grid.xs();
    let left = least_squares_slope(&xs[..quarter], &logs[..quarter]);
    let right = least_squares_slope(&xs[grid.nx - quarter..], &logs[grid.nx - quarter..]);
    let scale = m.abs().max(big_m.abs()).max(f64::MIN_POSITIVE);
    for (edge, fitted, predicted) in [("left", left, m), ("right", right, big_m)] {
        if !((fitted - predicted).abs() <= dominance * scale) {
            return Err(Error::Domain(format!(
                "{edge} growth of log|det H| is {fitted:.6} at t = {t}, expected {predicted:.6}; \
                 the leading coefficient of the frame vanishes"
            )));
        }
    }
    Ok(())
}

fn real_extremes(j: &DiagonalGenerator, spectrum: &[C64]) -> Result<Option<(f64, f64)>> {
    if !j.is_real() || spectrum.iter().any(|l| l.im != 0.0) {
        return Ok(None);
    }
    let js: Vec<f64> = j.entries().iter().map(|e| e.re).collect();
    let ls: Vec<f64> = spectrum.iter().map(|l| l.re).collect();
    perm_extremes(&ls, &js).map(Some)
}

/// Left-edge decay rates of `S - Λ` predicted from the frame exponents.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictedRates {
    pub m: f64,
    pub big_m: f64,
    /// Rate of entry `(i, j)`; `None` when no exponent contributes.
    pub entries: Vec<Vec<Option<f64>>>,
    pub diagonal: Option<f64>,
    pub off_diagonal: Option<f64>,
    pub overall: Option<f64>,
}

fn predicted_rates(j: &DiagonalGenerator, spectrum: &[C64]) -> Result<Option<PredictedRates>> {
    let Some((m, big_m)) = real_extremes(j, spectrum)? else {
        return Ok(None);
    };
    let js: Vec<f64> = j.entries().iter().map(|e| e.re).collect();
    let ls: Vec<f64> = spectrum.iter().map(|l| l.re).collect();
    let n = js.len();
    let mut entries = vec![vec![None; n]; n];
    for i in 0..n {
        for jj in 0..n {
            let mut best: Option<f64> = None;
            for k in 0..n {
                if ls[k] == ls[jj] {
                    continue;
                }
                let rest_l: Vec<f64> = (0..n).filter(|&a| a != k).map(|a| ls[a]).collect();
                let rest_j: Vec<f64> = (0..n).filter(|&a| a != jj).map(|a| js[a]).collect();
                let (lo, _) = perm_extremes(&rest_l, &rest_j)?;
                let e = ls[k] * js[i] + lo - m;
                best = Some(best.map_or(e, |b: f64| b.min(e)));
            }
            entries[i][jj] = best;
        }
    }
    let fold = |pred: &dyn Fn(usize, usize) -> bool| {
        let mut out: Option<f64> = None;
        for (i, row) in entries.iter().enumerate() {
            for (jj, e) in row.iter().enumerate() {
                if let (true, Some(v)) = (pred(i, jj), e) {
                    out = Some(out.map_or(*v, |o: f64| o.min(*v)));
                }
            }
        }
        out
    };
    let diagonal = fold(&|i, jj| i == jj);
    let off_diagonal = fold(&|i, jj| i != jj);
    let overall = fold(&|_, _| true);
    Ok(Some(PredictedRates {
        m,
        big_m,
        entries,
        diagonal,
        off_diagonal,
        overall,
    }))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SAsymptoticReport {
    pub t: f64,
    /// `max |S(x_min) - Λ|`.
    pub left_deviation: f64,
    /// Eigenvalue index on each diagonal slot of `S(x_max)`.
    pub right_permutation: Vec<usize>,
    /// `max |S(x_max) - D|` with `D` the permuted eigenvalue diagonal.
    pub right_deviation: f64,
    /// Fitted rate of `max |S - Λ|` over the left quarter.
    pub left_rate: Option<f64>,
    pub left_rate_diagonal: Option<f64>,
    pub left_rate_off_diagonal: Option<f64>,
    pub predicted: Option<PredictedRates>,
}

/// Edge behaviour of `S`: `S → Λ` at the left edge and a permuted
/// eigenvalue diagonal at the right edge.
pub fn asymptotic_s_check(frame: &DarbouxFrame, t: f64) -> Result<SAsymptoticReport> {
    let grid = frame.grid();
    let ti = grid.t_index(t)?;
    let spectrum = frame.spectrum_at(t)?;
    let lam = SquareMatrix::from_diag(&spectrum);
    let s = frame.s_slice(ti);
    let n = lam.dim();

    let quarter = (grid.nx / 4).max(3);
    let xs: Vec<f64> = (0..quarter).map(|k| grid.x(k)).collect();
    let devs: Vec<SquareMatrix> = (0..quarter).map(|k| &s[k] - &lam).collect();
    let scale = 1.0 + spectrum.iter().map(|l| l.norm()).fold(0.0, f64::max);
    let floor = 1e3 * f64::EPSILON * scale;
    let fit = |sel: &dyn Fn(&SquareMatrix) -> f64| {
        let ds: Vec<f64> = devs.iter().map(sel).collect();
        fit_exponential_rate(&xs, &ds, floor)
    };

    let last = &s[grid.nx - 1];
    let diag = last.diagonal();
    let perm = best_assignment(&diag, &spectrum);
    let d = SquareMatrix::from_diag(&perm.iter().map(|&k| spectrum[k]).collect::<Vec<_>>());
    debug_assert_eq!(d.dim(), n);

    Ok(SAsymptoticReport {
        t,
        left_deviation: devs[0].max_abs(),
        right_permutation: perm,
        right_deviation: (last - &d).max_abs(),
        left_rate: fit(&|m| m.max_abs()),
        left_rate_diagonal: fit(&|m| m.max_abs_diagonal()),
        left_rate_off_diagonal: fit(&|m| m.max_abs_off_diagonal()),
        predicted: predicted_rates(&frame.generator, &spectrum)?,
    })
}

/// Assignment of eigenvalue indices to diagonal slots minimizing the total
/// distance; exhaustive for small N, greedy beyond.
fn best_assignment(diag: &[C64], spectrum: &[C64]) -> Vec<usize> {
    let n = diag.len();
    if n <= 7 {
        let mut best = (f64::INFINITY, Vec::new());
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |p| {
            let cost: f64 = p
                .iter()
                .enumerate()
                .map(|(i, &k)| (diag[i] - spectrum[k]).norm())
                .sum();
            if cost < best.0 {
                best = (cost, p.to_vec());
            }
        });
        best.1
    } else {
        let mut used = vec![false; n];
        diag.iter()
            .map(|d| {
                let k = (0..n)
                    .filter(|&k| !used[k])
                    .min_by(|&a, &b| {
                        (d - spectrum[a])
                            .norm()
                            .total_cmp(&(d - spectrum[b]).norm())
                    })
                    .unwrap_or(0);
                used[k] = true;
                k
            })
            .collect()
    }
}

fn permute(p: &mut Vec<usize>, k: usize, visit: &mut dyn FnMut(&[usize])) {
    if k == p.len() {
        visit(p);
        return;
    }
    for i in k..p.len() {
        p.swap(k, i);
        permute(p, k + 1, visit);
        p.swap(k, i);
    }
}

/// `P' = P + [J, S]` pointwise.
pub fn dress_potential(
    p: &[SquareMatrix],
    j: &DiagonalGenerator,
    s: &[SquareMatrix],
) -> Result<Vec<SquareMatrix>> {
    if p.len() != s.len() {
        return Err(Error::Shape {
            expected: p.len(),
            found: s.len(),
        });
    }
    p.par_iter()
        .zip(s.par_iter())
        .map(|(pk, sk)| transform_p(pk, j, sk))
        .collect()
}

/// Dresses a single-time hierarchy with the dressing field `s` sampled at
/// the same time; constants are shifted forward by `β(Λ)`.
pub fn dress_hierarchy(
    seed: &HierarchyFields,
    s: &[SquareMatrix],
    spectrum: &[C64],
) -> Result<HierarchyFields> {
    let grid = seed.vs[0].grid.clone();
    if s.len() != grid.nx {
        return Err(Error::Shape {
            expected: grid.nx,
            found: s.len(),
        });
    }
    let dim = seed.generator.dim();
    let n = seed.order();
    let g = compute_g(&seed.flow, spectrum, dim)?;
    let per_point = (0..grid.nx)
        .into_par_iter()
        .map(|k| transform_v(&seed.coefficients_at(k), &s[k], &seed.flow, &g))
        .collect::<Result<Vec<_>>>()?;
    let mut levels: Vec<Vec<SquareMatrix>> = vec![Vec::with_capacity(grid.nx); n + 1];
    for point in per_point {
        for (i, v) in point.into_iter().enumerate() {
            levels[i].push(v);
        }
    }
    let vs = levels
        .into_iter()
        .map(|values| FieldGrid::new(grid.clone(), dim, values))
        .collect::<Result<Vec<_>>>()?;
    let shift = beta_shift(&seed.flow, &SquareMatrix::from_diag(spectrum), &g, n)?;
    let constants = shift_constants(&seed.constants, &shift, ShiftDirection::Forward)?;
    Ok(HierarchyFields {
        vs,
        constants,
        flow: seed.flow.clone(),
        generator: seed.generator.clone(),
        t: seed.t,
    })
}

/// The zero potential with diagonal-exponential eigenfunctions
/// `Φ = diag(exp(λ J_k x + θ_k(t)))`, seeded with constants `α - Σ β` so that
/// dressing by `steps` (one list of spectral paths per step) lands on `α`.
#[derive(Debug, Clone)]
pub struct TrivialSeed {
    pub generator: DiagonalGenerator,
    pub flow: SpectralPolynomial,
    pub target: IntegralConstants,
    pub steps: Vec<Vec<SpectralPath>>,
    /// Largest Simpson node spacing for the phases `θ_k(t)`.
    pub quadrature_step: f64,
}

impl TrivialSeed {
    pub fn new(
        generator: DiagonalGenerator,
        flow: SpectralPolynomial,
        target: IntegralConstants,
        steps: Vec<Vec<SpectralPath>>,
    ) -> Result<Self> {
        let n = target.order();
        if let Some(d) = flow.degree() {
            if d > n {
                return Err(Error::Domain(format!(
                    "seed of order {n} needs deg f <= {n}, got {d}"
                )));
            }
        }
        if target.dim() != generator.dim() {
            return Err(Error::Shape {
                expected: generator.dim(),
                found: target.dim(),
            });
        }
        Ok(Self {
            generator,
            flow,
            target,
            steps,
            quadrature_step: 2e-4,
        })
    }

    /// Seed constants `α - Σ_steps β(Λ_step(t))`.
    pub fn constants_at(&self, t: f64) -> Result<IntegralConstants> {
        let spectra = self
            .steps
            .iter()
            .map(|step| step.iter().map(|p| p.at(t)).collect::<Result<Vec<_>>>())
            .collect::<Result<Vec<_>>>()?;
        self.constants_for(&spectra)
    }

    fn constants_for(&self, spectra: &[Vec<C64>]) -> Result<IntegralConstants> {
        let dim = self.generator.dim();
        let n = self.target.order();
        let mut c = self.target.clone();
        for spectrum in spectra {
            let g = compute_g(&self.flow, spectrum, dim)?;
            let shift = beta_shift(&self.flow, &SquareMatrix::from_diag(spectrum), &g, n)?;
            c = shift_constants(&c, &shift, ShiftDirection::Inverse)?;
        }
        Ok(c)
    }

    pub fn hierarchy(&self, grid: &Grid, t: f64) -> Result<HierarchyFields> {
        let p = FieldGrid::zeros(grid.at_time(t), self.generator.dim());
        build_hierarchy_with(
            &p,
            &self.generator,
            &self.flow,
            &self.constants_at(t)?,
            t,
            &Tolerances::default(),
        )
    }

    /// `θ_k(t) = ∫_0^t Σ_i (α_i(s))_{kk} λ(s)^i ds` by composite Simpson.
    pub fn phases(&self, t: f64, path: &SpectralPath) -> Result<Vec<C64>> {
        let dim = self.generator.dim();
        if t == 0.0 {
            return Ok(vec![ZERO; dim]);
        }
        let mut m = (t.abs() / self.quadrature_step).ceil() as usize;
        m = m.max(2);
        m += m % 2;
        let lam = path.trajectory(t, m)?;
        let steps = self
            .steps
            .iter()
            .map(|step| {
                step.iter()
                    .map(|p| p.trajectory(t, m))
                    .collect::<Result<Vec<_>>>()
            })
            .collect::<Result<Vec<_>>>()?;
        let mut acc = vec![ZERO; dim];
        for node in 0..=m {
            let spectra: Vec<Vec<C64>> = steps
                .iter()
                .map(|step| step.iter().map(|traj| traj[node]).collect())
                .collect();
            let c = self.constants_for(&spectra)?;
            let w = if node == 0 || node == m {
                1.0
            } else if node % 2 == 1 {
                4.0
            } else {
                2.0
            };
            for (k, a) in acc.iter_mut().enumerate() {
                let mut power = ONE;
                let mut sum = ZERO;
                for alpha in c.alphas() {
                    sum += alpha[(k, k)] * power;
                    power *= lam[node];
                }
                *a += sum * w;
            }
        }
        let h = t / m as f64;
        Ok(acc.into_iter().map(|a| a * (h / 3.0)).collect())
    }
}

impl Eigenfunctions for TrivialSeed {
    fn dim(&self) -> usize {
        self.generator.dim()
    }

    fn at<'a>(&'a self, t: f64, path: &SpectralPath) -> Result<Evaluator<'a>> {
        let lam = path.at(t)?;
        let theta = self.phases(t, path)?;
        let js = self.generator.entries().to_vec();
        Ok(Box::new(move |x| {
            let d: Vec<C64> = js
                .iter()
                .zip(&theta)
                .map(|(&jk, &th)| (lam * jk * x + th).exp())
                .collect();
            Ok(SquareMatrix::from_diag(&d))
        }))
    }
}

/// Eigenfunctions of a dressed system, `p(λ)(λ - S)Φ`, where `S` is rebuilt
/// pointwise from the base eigenfunctions and the frame data.
pub struct DressedEigenfunctions {
    pub base: Arc<dyn Eigenfunctions>,
    pub lambdas: Vec<SpectralPath>,
    pub mixing: Vec<Vec<C64>>,
    pub tolerances: Tolerances,
}

impl DressedEigenfunctions {
    pub fn new(
        base: Arc<dyn Eigenfunctions>,
        lambdas: Vec<SpectralPath>,
        mixing: Vec<Vec<C64>>,
    ) -> Self {
        Self {
            base,
            lambdas,
            mixing,
            tolerances: Tolerances::default(),
        }
    }
}

impl Eigenfunctions for DressedEigenfunctions {
    fn dim(&self) -> usize {
        self.base.dim()
    }

    fn at<'a>(&'a self, t: f64, path: &SpectralPath) -> Result<Evaluator<'a>> {
        let spectrum = self
            .lambdas
            .iter()
            .map(|p| p.at(t))
            .collect::<Result<Vec<_>>>()?;
        let lam = path.at(t)?;
        check_not_degenerate(lam, &spectrum, self.tolerances.degenerate)?;
        let frame = self
            .lambdas
            .iter()
            .map(|p| self.base.at(t, p))
            .collect::<Result<Vec<_>>>()?;
        let phi = self.base.at(t, path)?;
        Ok(Box::new(move |x| {
            let cols = frame
                .iter()
                .zip(&self.mixing)
                .map(|(e, m)| Ok(e(x)?.matvec(m)))
                .collect::<Result<Vec<_>>>()?;
            let h = SquareMatrix::from_columns(&cols)?;
            let s = build_s_with(&h, &spectrum, self.tolerances.singular)?;
            transform_eigenfunction_with(&phi(x)?, lam, &s, &spectrum, self.tolerances.degenerate)
        }))
    }
}

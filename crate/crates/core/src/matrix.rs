//! Dense complex N×N algebra for small N.
//!
//! Every object in the hierarchy (potential, coefficients `V_i`, dressing
//! field, eigenfunction frame) is a [`SquareMatrix`]. The diagonal generator
//! `J` fixes the split of sl(N) into its centralizer (diagonal matrices) and
//! the complement (matrices with zero diagonal).

use std::fmt;
use std::ops::{Add, AddAssign, Index, IndexMut, Mul, Neg, Sub};

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tolerances::Tolerances;

pub type C64 = Complex64;

pub(crate) const ZERO: C64 = C64::new(0.0, 0.0);
pub(crate) const ONE: C64 = C64::new(1.0, 0.0);

/// Dense complex square matrix stored row-major.
#[derive(Clone, PartialEq, Serialize, Deserialize)]
pub struct SquareMatrix {
    n: usize,
    data: Vec<C64>,
}

impl SquareMatrix {
    pub fn zeros(n: usize) -> Self {
        Self {
            n,
            data: vec![ZERO; n * n],
        }
    }

    pub fn identity(n: usize) -> Self {
        Self::scalar(n, ONE)
    }

    pub fn scalar(n: usize, c: C64) -> Self {
        let mut m = Self::zeros(n);
        for i in 0..n {
            m[(i, i)] = c;
        }
        m
    }

    pub fn from_diag(diag: &[C64]) -> Self {
        let mut m = Self::zeros(diag.len());
        for (i, &d) in diag.iter().enumerate() {
            m[(i, i)] = d;
        }
        m
    }

    /// Builds a matrix from rows; every row must have the same length as the
    /// number of rows.
    pub fn from_rows(rows: &[Vec<C64>]) -> Result<Self> {
        let n = rows.len();
        let mut data = Vec::with_capacity(n * n);
        for row in rows {
            if row.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self { n, data })
    }

    pub fn from_real_rows(rows: &[&[f64]]) -> Result<Self> {
        let rows: Vec<Vec<C64>> = rows
            .iter()
            .map(|r| r.iter().map(|&v| C64::new(v, 0.0)).collect())
            .collect();
        Self::from_rows(&rows)
    }

    /// Builds a matrix whose columns are the given vectors.
    pub fn from_columns(cols: &[Vec<C64>]) -> Result<Self> {
        let n = cols.len();
        let mut m = Self::zeros(n);
        for (k, col) in cols.iter().enumerate() {
            if col.len() != n {
                return Err(Error::Shape {
                    expected: n,
                    found: col.len(),
                });
            }
            for (i, &v) in col.iter().enumerate() {
                m[(i, k)] = v;
            }
        }
        Ok(m)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.data
    }

    pub fn column(&self, k: usize) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, k)]).collect()
    }

    pub fn diagonal(&self) -> Vec<C64> {
        (0..self.n).map(|i| self[(i, i)]).collect()
    }

    pub fn trace(&self) -> C64 {
        (0..self.n).map(|i| self[(i, i)]).sum()
    }

    /// Largest entry modulus.
    pub fn max_abs(&self) -> f64 {
        self.data.iter().map(|z| z.norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_diagonal(&self) -> f64 {
        (0..self.n).map(|i| self[(i, i)].norm()).fold(0.0, f64::max)
    }

    pub fn max_abs_off_diagonal(&self) -> f64 {
        let mut m: f64 = 0.0;
        for i in 0..self.n {
            for j in 0..self.n {
                if i != j {
                    m = m.max(self[(i, j)].norm());
                }
            }
        }
        m
    }

    pub fn is_finite(&self) -> bool {
        self.data
            .iter()
            .all(|z| z.re.is_finite() && z.im.is_finite())
    }

    pub fn scale(&self, c: C64) -> Self {
        Self {
            n: self.n,
            data: self.data.iter().map(|&z| z * c).collect(),
        }
    }

    /// `self + c·I`.
    pub fn add_scalar(&self, c: C64) -> Self {
        let mut m = self.clone();
        for i in 0..self.n {
            m[(i, i)] += c;
        }
        m
    }

    pub fn matmul(&self, rhs: &Self) -> Self {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        let n = self.n;
        let mut out = Self::zeros(n);
        for i in 0..n {
            for k in 0..n {
                let a = self.data[i * n + k];
                if a == ZERO {
                    continue;
                }
                for j in 0..n {
                    out.data[i * n + j] += a * rhs.data[k * n + j];
                }
            }
        }
        out
    }

    pub fn matvec(&self, v: &[C64]) -> Vec<C64> {
        assert_eq!(self.n, v.len(), "matrix dimension mismatch");
        (0..self.n)
            .map(|i| (0..self.n).map(|k| self[(i, k)] * v[k]).sum())
            .collect()
    }

    pub fn powi(&self, k: usize) -> Self {
        let mut out = Self::identity(self.n);
        for _ in 0..k {
            out = out.matmul(self);
        }
        out
    }

    /// Unchecked `ab - ba` for callers that already validated shapes.
    pub(crate) fn bracket(&self, rhs: &Self) -> Self {
        &self.matmul(rhs) - &rhs.matmul(self)
    }

    /// Coefficients `c_0..c_n` (ascending, monic) of `det(zI - self)`,
    /// by the Faddeev–LeVerrier recursion.
    pub fn char_poly(&self) -> Vec<C64> {
        let n = self.n;
        let mut coeffs = vec![ZERO; n + 1];
        coeffs[n] = ONE;
        let mut m = Self::zeros(n);
        for k in 1..=n {
            // M_k = A M_{k-1} + c_{n-k+1} I
            m = self.matmul(&m).add_scalar(coeffs[n - k + 1]);
            let am = self.matmul(&m);
            coeffs[n - k] = -am.trace() / k as f64;
        }
        coeffs
    }

    fn check_dim(&self, other: &Self) -> Result<()> {
        if self.n != other.n {
            return Err(Error::Shape {
                expected: self.n,
                found: other.n,
            });
        }
        Ok(())
    }
}

impl fmt::Debug for SquareMatrix {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[")?;
        for i in 0..self.n {
            if i > 0 {
                write!(f, "; ")?;
            }
            for j in 0..self.n {
                if j > 0 {
                    write!(f, ", ")?;
                }
                write!(f, "{}", self[(i, j)])?;
            }
        }
        write!(f, "]")
    }
}

impl Index<(usize, usize)> for SquareMatrix {
    type Output = C64;
    #[inline]
    fn index(&self, (i, j): (usize, usize)) -> &C64 {
        &self.data[i * self.n + j]
    }
}

impl IndexMut<(usize, usize)> for SquareMatrix {
    #[inline]
    fn index_mut(&mut self, (i, j): (usize, usize)) -> &mut C64 {
        &mut self.data[i * self.n + j]
    }
}

impl Add for &SquareMatrix {
    type Output = SquareMatrix;
    fn add(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a + b)
                .collect(),
        }
    }
}

impl Sub for &SquareMatrix {
    type Output = SquareMatrix;
    fn sub(self, rhs: &SquareMatrix) -> SquareMatrix {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        SquareMatrix {
            n: self.n,
            data: self
                .data
                .iter()
                .zip(&rhs.data)
                .map(|(a, b)| a - b)
                .collect(),
        }
    }
}

impl Mul for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: &SquareMatrix) -> SquareMatrix {
        self.matmul(rhs)
    }
}

impl Mul<C64> for &SquareMatrix {
    type Output = SquareMatrix;
    fn mul(self, rhs: C64) -> SquareMatrix {
        self.scale(rhs)
    }
}

impl Neg for &SquareMatrix {
    type Output = SquareMatrix;
    fn neg(self) -> SquareMatrix {
        self.scale(-ONE)
    }
}

impl AddAssign<&SquareMatrix> for SquareMatrix {
    fn add_assign(&mut self, rhs: &SquareMatrix) {
        assert_eq!(self.n, rhs.n, "matrix dimension mismatch");
        for (a, b) in self.data.iter_mut().zip(&rhs.data) {
            *a += b;
        }
    }
}

/// The fixed diagonal generator `J = diag(J_1, ..., J_N)` of sl(N).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DiagonalGenerator {
    diag: Vec<C64>,
}

impl DiagonalGenerator {
    /// Validates pairwise distinct entries and zero trace.
    pub fn new(diag: Vec<C64>) -> Result<Self> {
        Self::with_tolerance(diag, Tolerances::default().algebraic)
    }

    pub fn with_tolerance(diag: Vec<C64>, tol: f64) -> Result<Self> {
        if diag.len() < 2 {
            return Err(Error::Domain(format!(
                "J must have dimension at least 2, got {}",
                diag.len()
            )));
        }
        for i in 0..diag.len() {
            for k in i + 1..diag.len() {
                if (diag[i] - diag[k]).norm() <= tol {
                    return Err(Error::SingularGenerator(i, k));
                }
            }
        }
        let tr: C64 = diag.iter().sum();
        if tr.norm() > tol {
            return Err(Error::Domain(format!("J must be trace free, trace = {tr}")));
        }
        Ok(Self { diag })
    }

    pub fn real(diag: &[f64]) -> Result<Self> {
        Self::new(diag.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn dim(&self) -> usize {
        self.diag.len()
    }

    pub fn entries(&self) -> &[C64] {
        &self.diag
    }

    pub fn matrix(&self) -> SquareMatrix {
        SquareMatrix::from_diag(&self.diag)
    }

    pub fn is_real(&self) -> bool {
        self.diag.iter().all(|z| z.im == 0.0)
    }

    /// Indices ordering the entries by decreasing real part, the convention
    /// `J_1 > J_2 > ... > J_N`.
    pub fn descending_order(&self) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..self.dim()).collect();
        idx.sort_by(|&a, &b| {
            self.diag[b]
                .re
                .total_cmp(&self.diag[a].re)
                .then(self.diag[b].im.total_cmp(&self.diag[a].im))
        });
        idx
    }

    /// `[J, a]` computed entrywise as `(J_i - J_k) a_ik`.
    pub fn ad(&self, a: &SquareMatrix) -> SquareMatrix {
        let n = self.dim();
        let mut out = SquareMatrix::zeros(n);
        for i in 0..n {
            for k in 0..n {
                if i != k {
                    out[(i, k)] = (self.diag[i] - self.diag[k]) * a[(i, k)];
                }
            }
        }
        out
    }

    fn check(&self, a: &SquareMatrix) -> Result<()> {
        if a.dim() != self.dim() {
            return Err(Error::Shape {
                expected: self.dim(),
                found: a.dim(),
            });
        }
        Ok(())
    }
}

/// `ab - ba`.
pub fn commutator(a: &SquareMatrix, b: &SquareMatrix) -> Result<SquareMatrix> {
    a.check_dim(b)?;
    Ok(a.bracket(b))
}

/// Projection onto the centralizer of `J` (the diagonal part).
pub fn project_diag(a: &SquareMatrix, j: &DiagonalGenerator) -> Result<SquareMatrix> {
    j.check(a)?;
    Ok(SquareMatrix::from_diag(&a.diagonal()))
}

/// Projection onto the orthogonal complement of the centralizer (the
/// off-diagonal part).
pub fn project_off(a: &SquareMatrix, j: &DiagonalGenerator) -> Result<SquareMatrix> {
    j.check(a)?;
    let mut out = a.clone();
    for i in 0..a.dim() {
        out[(i, i)] = ZERO;
    }
    Ok(out)
}

/// Inverse of `ad J` restricted to off-diagonal matrices: the unique
/// off-diagonal `X` with `[J, X] = y`.
pub fn adj_inverse(y: &SquareMatrix, j: &DiagonalGenerator) -> Result<SquareMatrix> {
    adj_inverse_with(y, j, Tolerances::default().algebraic)
}

pub fn adj_inverse_with(y: &SquareMatrix, j: &DiagonalGenerator, tol: f64) -> Result<SquareMatrix> {
    j.check(y)?;
    let diag = y.max_abs_diagonal();
    if diag > tol {
        return Err(Error::Domain(format!(
            "ad_J inverse needs a zero diagonal, found |y_ii| = {diag:e}"
        )));
    }
    let e = j.entries();
    let n = y.dim();
    let mut x = SquareMatrix::zeros(n);
    for i in 0..n {
        for k in 0..n {
            if i != k {
                let gap = e[i] - e[k];
                if gap.norm() <= tol {
                    return Err(Error::SingularGenerator(i.min(k), i.max(k)));
                }
                x[(i, k)] = y[(i, k)] / gap;
            }
        }
    }
    Ok(x)
}

/// Determinant: cofactor expansion for `n <= 4`, partially pivoted LU beyond.
pub fn det(a: &SquareMatrix) -> C64 {
    if a.dim() <= 4 {
        cofactor_det(a.as_slice(), a.dim())
    } else {
        lu_det(a)
    }
}

fn cofactor_det(m: &[C64], n: usize) -> C64 {
    match n {
        0 => ONE,
        1 => m[0],
        2 => m[0] * m[3] - m[1] * m[2],
        _ => {
            let mut total = ZERO;
            let mut minor = Vec::with_capacity((n - 1) * (n - 1));
            for col in 0..n {
                if m[col] == ZERO {
                    continue;
                }
                minor.clear();
                for r in 1..n {
                    for c in 0..n {
                        if c != col {
                            minor.push(m[r * n + c]);
                        }
                    }
                }
                let sign = if col % 2 == 0 { 1.0 } else { -1.0 };
                total += m[col] * sign * cofactor_det(&minor, n - 1);
            }
            total
        }
    }
}

fn lu_det(a: &SquareMatrix) -> C64 {
    let n = a.dim();
    let mut m = a.as_slice().to_vec();
    let mut d = ONE;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| m[r1 * n + col].norm().total_cmp(&m[r2 * n + col].norm()))
            .unwrap();
        if m[pivot * n + col] == ZERO {
            return ZERO;
        }
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
            }
            d = -d;
        }
        let p = m[col * n + col];
        d *= p;
        for r in col + 1..n {
            let factor = m[r * n + col] / p;
            for c in col..n {
                let v = m[col * n + c];
                m[r * n + c] -= factor * v;
            }
        }
    }
    d
}

/// Inverse by Gauss–Jordan elimination with partial pivoting.
pub fn invert(a: &SquareMatrix) -> Result<SquareMatrix> {
    invert_with(a, Tolerances::default().singular)
}

/// Inverse with an explicit relative singularity threshold on
/// `|det a| / max|a_ij|^n`.
pub fn invert_with(a: &SquareMatrix, threshold: f64) -> Result<SquareMatrix> {
    let n = a.dim();
    let d = det(a);
    let scale = a.max_abs();
    if scale == 0.0 || !(d.norm() > threshold * scale.powi(n as i32)) {
        return Err(Error::Conditioning { det: d.norm() });
    }
    let mut m = a.as_slice().to_vec();
    let mut inv = SquareMatrix::identity(n).data;
    for col in 0..n {
        let pivot = (col..n)
            .max_by(|&r1, &r2| m[r1 * n + col].norm().total_cmp(&m[r2 * n + col].norm()))
            .unwrap();
        if pivot != col {
            for c in 0..n {
                m.swap(pivot * n + c, col * n + c);
                inv.swap(pivot * n + c, col * n + c);
            }
        }
        let p = m[col * n + col];
        for c in 0..n {
            m[col * n + c] /= p;
            inv[col * n + c] /= p;
        }
        for r in 0..n {
            if r == col {
                continue;
            }
            let factor = m[r * n + col];
            if factor == ZERO {
                continue;
            }
            for c in 0..n {
                let mv = m[col * n + c];
                let iv = inv[col * n + c];
                m[r * n + c] -= factor * mv;
                inv[r * n + c] -= factor * iv;
            }
        }
    }
    Ok(SquareMatrix { n, data: inv })
}

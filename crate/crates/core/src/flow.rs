//! Spectral parameter evolution `λ_t = f(λ)`, the averaged quotient
//! polynomial `g(λ)` and the permutation extremes functional.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::matrix::{C64, ONE, ZERO};

/// Coefficients `f_0..f_d` of the flow polynomial, ascending powers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPolynomial {
    coeffs: Vec<C64>,
}

impl SpectralPolynomial {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn real(coeffs: &[f64]) -> Self {
        Self::new(coeffs.iter().map(|&v| C64::new(v, 0.0)).collect())
    }

    pub fn zero() -> Self {
        Self::new(vec![ZERO])
    }

    /// `c λ^k`.
    pub fn monomial(k: usize, c: C64) -> Self {
        let mut coeffs = vec![ZERO; k + 1];
        coeffs[k] = c;
        Self::new(coeffs)
    }

    pub fn coeffs(&self) -> &[C64] {
        &self.coeffs
    }

    /// Coefficient of `λ^i`, zero beyond the stored list.
    pub fn coeff(&self, i: usize) -> C64 {
        self.coeffs.get(i).copied().unwrap_or(ZERO)
    }

    /// Degree ignoring trailing zeros; `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|z| *z != ZERO)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    pub fn eval(&self, lambda: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, &c| acc * lambda + c)
    }

    /// Coefficient list padded (or truncated) to `len` entries. Truncation
    /// only drops zeros when the degree fits.
    pub fn padded(&self, len: usize) -> Vec<C64> {
        (0..len).map(|i| self.coeff(i)).collect()
    }

    /// Checks the Darboux bound `deg f <= n + 2` for a hierarchy of order `n`.
    pub fn check_order(&self, n: usize) -> Result<()> {
        match self.degree() {
            Some(d) if d > n + 2 => Err(Error::Domain(format!(
                "flow degree {d} exceeds n + 2 = {} for hierarchy order {n}",
                n + 2
            ))),
            _ => Ok(()),
        }
    }

    pub fn mul(&self, other: &Self) -> Self {
        if self.coeffs.is_empty() || other.coeffs.is_empty() {
            return Self::zero();
        }
        let mut out = vec![ZERO; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &a) in self.coeffs.iter().enumerate() {
            for (k, &b) in other.coeffs.iter().enumerate() {
                out[i + k] += a * b;
            }
        }
        Self::new(out)
    }
}

/// The averaged quotient `g(λ) = (1/N) Σ_i (f(λ) - f(λ_i)) / (λ - λ_i)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GPolynomial {
    pub coeffs: Vec<C64>,
    pub roots_used: Vec<C64>,
}

impl GPolynomial {
    pub fn zero() -> Self {
        Self {
            coeffs: vec![ZERO],
            roots_used: Vec::new(),
        }
    }

    pub fn coeff(&self, i: usize) -> C64 {
        self.coeffs.get(i).copied().unwrap_or(ZERO)
    }

    pub fn eval(&self, lambda: C64) -> C64 {
        self.coeffs
            .iter()
            .rev()
            .fold(ZERO, |acc, &c| acc * lambda + c)
    }
}

/// Quotient `q` with `q(λ)(λ - root) = f(λ) - f(root)`, by synthetic division.
pub fn synthetic_quotient(f: &SpectralPolynomial, root: C64) -> SpectralPolynomial {
    let c = f.coeffs();
    if c.len() <= 1 {
        return SpectralPolynomial::zero();
    }
    let d = c.len() - 1;
    let mut q = vec![ZERO; d];
    q[d - 1] = c[d];
    for k in (1..d).rev() {
        q[k - 1] = c[k] + root * q[k];
    }
    SpectralPolynomial::new(q)
}

/// Builds `g` from the flow and the eigenvalues of one dressing step.
///
/// The eigenvalues are summed in lexicographic `(Re, Im)` order so the
/// coefficients do not depend on the order the caller lists them in.
pub fn compute_g(f: &SpectralPolynomial, lambdas: &[C64], n_dim: usize) -> Result<GPolynomial> {
    if lambdas.is_empty() {
        return Err(Error::Domain("g needs at least one eigenvalue".into()));
    }
    if lambdas.len() != n_dim {
        return Err(Error::Shape {
            expected: n_dim,
            found: lambdas.len(),
        });
    }
    let mut sorted = lambdas.to_vec();
    sorted.sort_by(|a, b| a.re.total_cmp(&b.re).then(a.im.total_cmp(&b.im)));

    let len = f.coeffs().len().saturating_sub(1).max(1);
    let mut coeffs = vec![ZERO; len];
    for &root in &sorted {
        let q = synthetic_quotient(f, root);
        for (acc, &c) in coeffs.iter_mut().zip(q.coeffs()) {
            *acc += c;
        }
    }
    let inv_n = 1.0 / n_dim as f64;
    for c in &mut coeffs {
        *c *= inv_n;
    }
    Ok(GPolynomial {
        coeffs,
        roots_used: lambdas.to_vec(),
    })
}

/// Minimum and maximum of `Σ x_i y_σ(i)` over all permutations `σ`.
///
/// By the rearrangement inequality the maximum pairs both lists in the same
/// sorted order and the minimum pairs them in opposite order.
pub fn perm_extremes(xs: &[f64], ys: &[f64]) -> Result<(f64, f64)> {
    if xs.len() != ys.len() {
        return Err(Error::Shape {
            expected: xs.len(),
            found: ys.len(),
        });
    }
    let mut xs = xs.to_vec();
    let mut ys = ys.to_vec();
    xs.sort_by(f64::total_cmp);
    ys.sort_by(f64::total_cmp);
    let max = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
    let min = xs.iter().zip(ys.iter().rev()).map(|(a, b)| a * b).sum();
    Ok((min, max))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum FlowMethod {
    ClosedForm,
    Rk4,
}

/// A spectral parameter `λ(t)` defined by its initial value and the flow.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectralPath {
    pub initial: C64,
    pub flow: SpectralPolynomial,
    pub method: FlowMethod,
    pub rk4_step: f64,
    /// Admissible time interval for rk4 integration.
    pub horizon: (f64, f64),
}

impl SpectralPath {
    pub fn closed_form(initial: C64, flow: SpectralPolynomial) -> Self {
        Self {
            initial,
            flow,
            method: FlowMethod::ClosedForm,
            rk4_step: 1e-4,
            horizon: (-0.4, 0.4),
        }
    }

    pub fn rk4(initial: C64, flow: SpectralPolynomial) -> Self {
        Self {
            method: FlowMethod::Rk4,
            ..Self::closed_form(initial, flow)
        }
    }

    /// Closed form when one exists, rk4 otherwise.
    pub fn auto(initial: C64, flow: SpectralPolynomial) -> Self {
        let path = Self::closed_form(initial, flow);
        if path.monomial().is_some() {
            path
        } else {
            Self {
                method: FlowMethod::Rk4,
                ..path
            }
        }
    }

    pub fn with_step(mut self, step: f64) -> Self {
        self.rk4_step = step;
        self
    }

    pub fn with_horizon(mut self, lo: f64, hi: f64) -> Self {
        self.horizon = (lo, hi);
        self
    }

    /// The same flow started from `-λ(0)`.
    pub fn negated(&self) -> Self {
        Self {
            initial: -self.initial,
            ..self.clone()
        }
    }

    /// `λ(t)`.
    pub fn at(&self, t: f64) -> Result<C64> {
        evolve_lambda(self, t)
    }

    /// `λ` on the uniform nodes `k t_end / m`, `k = 0..=m`.
    pub fn trajectory(&self, t_end: f64, m: usize) -> Result<Vec<C64>> {
        let m = m.max(1);
        match self.method {
            FlowMethod::ClosedForm => (0..=m)
                .map(|k| self.at(t_end * k as f64 / m as f64))
                .collect(),
            FlowMethod::Rk4 => {
                self.check_horizon(t_end)?;
                let node_dt = t_end / m as f64;
                let sub = (node_dt.abs() / self.rk4_step).ceil().max(1.0) as usize;
                let dt = node_dt / sub as f64;
                let mut out = Vec::with_capacity(m + 1);
                let mut lam = self.initial;
                let mut t = 0.0;
                out.push(lam);
                for _ in 0..m {
                    for _ in 0..sub {
                        lam = rk4_step(&self.flow, lam, t, dt)?;
                        t += dt;
                    }
                    out.push(lam);
                }
                Ok(out)
            }
        }
    }

    /// `(k, a)` when the flow is the single monomial `a λ^k`.
    fn monomial(&self) -> Option<(usize, C64)> {
        match self.flow.degree() {
            None => Some((0, ZERO)),
            Some(d) => {
                let single = (0..d).all(|i| self.flow.coeff(i) == ZERO);
                single.then(|| (d, self.flow.coeff(d)))
            }
        }
    }

    fn check_horizon(&self, t: f64) -> Result<()> {
        let (lo, hi) = self.horizon;
        if t < lo || t > hi {
            return Err(Error::Domain(format!(
                "t = {t} lies outside the rk4 horizon [{lo}, {hi}]"
            )));
        }
        Ok(())
    }
}

/// Evaluates `λ(t)` for a spectral path.
///
/// Closed forms cover monomial flows `a λ^k`: `λ(t) = λ(0) + a t` for `k = 0`,
/// `λ(0) e^{a t}` for `k = 1`, and for `k >= 2`
/// `λ(t) = λ(0) (1 - (k-1) a t λ(0)^{k-1})^{-1/(k-1)}` on the principal branch,
/// which keeps the sign of a real `λ(0)`.
pub fn evolve_lambda(path: &SpectralPath, t: f64) -> Result<C64> {
    match path.method {
        FlowMethod::ClosedForm => {
            let (k, a) = path.monomial().ok_or_else(|| {
                Error::Domain("flow is not a monomial; no closed form, use rk4".into())
            })?;
            let l0 = path.initial;
            match k {
                0 => Ok(l0 + a * t),
                1 => Ok(l0 * (a * t).exp()),
                _ => {
                    if l0 == ZERO {
                        return Ok(ZERO);
                    }
                    let km1 = (k - 1) as f64;
                    let rate = a * km1 * l0.powu(k as u32 - 1);
                    let base = ONE - rate * t;
                    // The segment 1 -> base meets the cut (-inf, 0] only when
                    // rate·t is real.
                    if (rate * t).im == 0.0 && base.re <= 0.0 {
                        let critical_time = if rate.re != 0.0 {
                            1.0 / rate.re
                        } else {
                            f64::INFINITY
                        };
                        return Err(Error::BlowUp { t, critical_time });
                    }
                    Ok(l0 * base.powf(-1.0 / km1))
                }
            }
        }
        FlowMethod::Rk4 => {
            path.check_horizon(t)?;
            if t == 0.0 {
                return Ok(path.initial);
            }
            let steps = (t.abs() / path.rk4_step).ceil().max(1.0) as usize;
            let dt = t / steps as f64;
            let mut lam = path.initial;
            let mut s = 0.0;
            for _ in 0..steps {
                lam = rk4_step(&path.flow, lam, s, dt)?;
                s += dt;
            }
            Ok(lam)
        }
    }
}

fn rk4_step(f: &SpectralPolynomial, lam: C64, t: f64, dt: f64) -> Result<C64> {
    let k1 = f.eval(lam);
    let k2 = f.eval(lam + k1 * (dt / 2.0));
    let k3 = f.eval(lam + k2 * (dt / 2.0));
    let k4 = f.eval(lam + k3 * dt);
    let incr = (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
    let next = lam + incr;
    if !(next.re.is_finite() && next.im.is_finite()) {
        return Err(Error::Stiffness {
            t,
            reason: "non-finite state".into(),
        });
    }
    if incr.norm() > 0.5 * (1.0 + lam.norm()) {
        return Err(Error::Stiffness {
            t,
            reason: format!(
                "step changes lambda by {:.3e}; reduce the step",
                incr.norm()
            ),
        });
    }
    Ok(next)
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn cubic() -> SpectralPolynomial {
        SpectralPolynomial::real(&[0.0, 0.0, 0.0, 1.0])
    }

    #[test]
    fn isospectral_flow_is_constant() {
        let path = SpectralPath::closed_form(C64::new(0.3, -0.2), SpectralPolynomial::zero());
        for t in [-0.3, 0.0, 0.25] {
            assert_eq!(path.at(t).unwrap(), C64::new(0.3, -0.2));
        }
        let rk = SpectralPath::rk4(C64::new(0.3, -0.2), SpectralPolynomial::zero());
        assert_eq!(rk.at(0.2).unwrap(), C64::new(0.3, -0.2));
    }

    #[test]
    fn cubic_flow_negative_branch() {
        let path = SpectralPath::closed_form(c(-1.0), cubic());
        for t in [-0.3, 0.0, 0.1, 0.2, 0.4] {
            let lam = path.at(t).unwrap();
            assert!(lam.re < 0.0);
            assert!(lam.im == 0.0);
            assert!((lam * lam - 1.0 / (1.0 - 2.0 * t)).norm() < 1e-12);
        }
    }

    #[test]
    fn cubic_flow_blow_up_names_critical_time() {
        let path = SpectralPath::closed_form(c(-1.0), cubic());
        match path.at(0.6) {
            Err(Error::BlowUp { critical_time, .. }) => {
                assert!((critical_time - 0.5).abs() < 1e-15)
            }
            other => panic!("expected blow-up, got {other:?}"),
        }
    }

    #[test]
    fn linear_flow_rk4_matches_exponential() {
        let f = SpectralPolynomial::real(&[0.0, 1.0]);
        let l0 = C64::new(0.7, 0.2);
        let exact = l0 * 1f64.exp();
        let rk = SpectralPath::rk4(l0, f.clone()).with_horizon(-2.0, 2.0);
        assert!((rk.at(1.0).unwrap() - exact).norm() < 1e-8);
        let closed = SpectralPath::closed_form(l0, f);
        assert!((closed.at(1.0).unwrap() - exact).norm() < 1e-14);
    }

    #[test]
    fn rk4_observed_order_four() {
        let exact = SpectralPath::closed_form(c(-1.0), cubic()).at(0.2).unwrap();
        let err = |step: f64| {
            let p = SpectralPath::rk4(c(-1.0), cubic()).with_step(step);
            (p.at(0.2).unwrap() - exact).norm()
        };
        let order = (err(0.01) / err(0.005)).log2();
        assert!((3.7..=4.3).contains(&order), "order {order}");
    }

    #[test]
    fn rk4_rejects_out_of_horizon_and_blow_up() {
        let p = SpectralPath::rk4(c(-1.0), cubic());
        assert!(matches!(p.at(0.5), Err(Error::Domain(_))));
        let wild = SpectralPath::rk4(c(-1.0), cubic())
            .with_horizon(0.0, 2.0)
            .with_step(0.1);
        assert!(matches!(wild.at(0.9), Err(Error::Stiffness { .. })));
    }

    #[test]
    fn non_monomial_flow_has_no_closed_form() {
        let f = SpectralPolynomial::real(&[1.0, 0.0, 1.0]);
        let p = SpectralPath::closed_form(c(0.1), f.clone());
        assert!(matches!(p.at(0.1), Err(Error::Domain(_))));
        assert_eq!(SpectralPath::auto(c(0.1), f).method, FlowMethod::Rk4);
    }

    #[test]
    fn trajectory_matches_pointwise_evaluation() {
        let f = SpectralPolynomial::real(&[0.5, 0.0, 1.0]);
        let p = SpectralPath::rk4(c(0.2), f).with_step(1e-3);
        let traj = p.trajectory(0.3, 6).unwrap();
        assert_eq!(traj.len(), 7);
        assert!((traj[6] - p.at(0.3).unwrap()).norm() < 1e-10);
        assert!((traj[3] - p.at(0.15).unwrap()).norm() < 1e-10);
    }

    #[test]
    fn synthetic_quotient_examples() {
        let a = C64::new(0.4, -1.1);
        let q = synthetic_quotient(&cubic(), a);
        assert_eq!(q.coeffs(), &[a * a, a, ONE]);
        assert!(synthetic_quotient(&SpectralPolynomial::real(&[3.0]), a).is_zero());
    }

    #[test]
    fn synthetic_quotient_product_identity_random() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        for _ in 0..50 {
            let coeffs: Vec<C64> = (0..6)
                .map(|_| C64::new(rng.gen_range(-2.0..2.0), rng.gen_range(-2.0..2.0)))
                .collect();
            let f = SpectralPolynomial::new(coeffs);
            let root = C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
            let q = synthetic_quotient(&f, root);
            let back = q.mul(&SpectralPolynomial::new(vec![-root, ONE]));
            let mut expected = f.coeffs().to_vec();
            expected[0] -= f.eval(root);
            for (i, e) in expected.iter().enumerate() {
                assert!((back.coeff(i) - e).norm() < 1e-13);
            }
        }
    }

    #[test]
    fn g_for_cubic_flow_and_symmetric_pair() {
        let l0 = c(-0.9);
        let g = compute_g(&cubic(), &[l0, -l0], 2).unwrap();
        assert_eq!(g.coeffs, vec![l0 * l0, ZERO, ONE]);
    }

    #[test]
    fn g_examples() {
        let g = compute_g(&SpectralPolynomial::zero(), &[c(1.0), c(2.0)], 2).unwrap();
        assert!(g.coeffs.iter().all(|z| *z == ZERO));

        let (a, b) = (C64::new(0.3, 0.1), C64::new(-1.2, 0.4));
        let g = compute_g(&SpectralPolynomial::real(&[0.0, 0.0, 1.0]), &[a, b], 2).unwrap();
        // average of (λ + a) and (λ + b)
        assert!((g.coeffs[0] - (a + b) / 2.0).norm() < 1e-15);
        assert_eq!(g.coeffs[1], ONE);

        assert!(matches!(compute_g(&cubic(), &[], 0), Err(Error::Domain(_))));
        assert!(matches!(
            compute_g(&cubic(), &[a], 2),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn g_is_order_independent() {
        let mut rng = ChaCha8Rng::seed_from_u64(21);
        let f = SpectralPolynomial::new(
            (0..5)
                .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
                .collect(),
        );
        let mut lambdas: Vec<C64> = (0..4)
            .map(|_| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)))
            .collect();
        let g1 = compute_g(&f, &lambdas, 4).unwrap();
        lambdas.reverse();
        lambdas.swap(0, 2);
        let g2 = compute_g(&f, &lambdas, 4).unwrap();
        assert_eq!(g1.coeffs, g2.coeffs);
    }

    fn brute_force_extremes(xs: &[f64], ys: &[f64]) -> (f64, f64) {
        fn permute(k: usize, p: &mut Vec<usize>, out: &mut Vec<Vec<usize>>) {
            if k == p.len() {
                out.push(p.clone());
                return;
            }
            for i in k..p.len() {
                p.swap(k, i);
                permute(k + 1, p, out);
                p.swap(k, i);
            }
        }
        let mut perms = Vec::new();
        permute(0, &mut (0..xs.len()).collect(), &mut perms);
        let sums: Vec<f64> = perms
            .iter()
            .map(|p| xs.iter().zip(p).map(|(x, &k)| x * ys[k]).sum())
            .collect();
        (
            sums.iter().cloned().fold(f64::INFINITY, f64::min),
            sums.iter().cloned().fold(f64::NEG_INFINITY, f64::max),
        )
    }

    #[test]
    fn perm_extremes_examples() {
        assert_eq!(
            perm_extremes(&[1.0, -1.0], &[-1.0, 1.0]).unwrap(),
            (-2.0, 2.0)
        );
        let (lo, hi) = perm_extremes(&[1.0, 2.0, -0.5], &[3.0, 3.0, 3.0]).unwrap();
        assert_eq!(lo, 7.5);
        assert_eq!(hi, 7.5);
        assert!(matches!(
            perm_extremes(&[1.0], &[1.0, 2.0]),
            Err(Error::Shape { .. })
        ));
    }

    #[test]
    fn perm_extremes_matches_enumeration() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        for _ in 0..30 {
            let xs: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let ys: Vec<f64> = (0..5).map(|_| rng.gen_range(-3.0..3.0)).collect();
            let (lo, hi) = perm_extremes(&xs, &ys).unwrap();
            let (blo, bhi) = brute_force_extremes(&xs, &ys);
            assert!((lo - blo).abs() < 1e-12 && (hi - bhi).abs() < 1e-12);
        }
    }

    proptest::proptest! {
        #[test]
        fn identity_pairing_lies_between_extremes(
            pairs in proptest::collection::vec((-10.0f64..10.0, -10.0f64..10.0), 1..8)
        ) {
            let xs: Vec<f64> = pairs.iter().map(|p| p.0).collect();
            let ys: Vec<f64> = pairs.iter().map(|p| p.1).collect();
            let (lo, hi) = perm_extremes(&xs, &ys).unwrap();
            let id: f64 = xs.iter().zip(&ys).map(|(a, b)| a * b).sum();
            proptest::prop_assert!(lo <= id + 1e-9 && id <= hi + 1e-9);
        }
    }
}

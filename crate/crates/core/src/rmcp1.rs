//! Robin-modified Chebyshev polynomials of the first kind.
//!
//! `φ_k(x) = (x² + A_k x + B_k) · T*_k(x)`, with `(A_k, B_k)` fixed so that every
//! `φ_k` satisfies both homogeneous Robin conditions
//!
//! ```text
//! σ0 u(a) + β0 u'(a) = 0,    σ1 u(b) + β1 u'(b) = 0.
//! ```
//!
//! Any linear combination of the `φ_k` therefore satisfies the boundary
//! conditions exactly. The derivative of `φ_n` is expanded back into the basis,
//! `φ_n' = Σ_{j<n} a_j(n) φ_j + e_1(n) x + e_0(n)`, which gives the strictly
//! lower-triangular operational matrix `H` with `dΦ/dx = HΦ + ε(x)`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};
use crate::polycore::{cheb_eval, Interval, Poly};

/// Homogeneous Robin boundary coefficients.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct RobinBC {
    pub sigma0: f64,
    pub sigma1: f64,
    pub beta0: f64,
    pub beta1: f64,
}

impl RobinBC {
    /// Validates `σ0 > 0`, `σ1 > 0`, `β0 ≤ 0`, `β1 ≥ 0`.
    pub fn new(sigma0: f64, sigma1: f64, beta0: f64, beta1: f64) -> Result<Self> {
        if !(sigma0 > 0.0 && sigma1 > 0.0 && beta0 <= 0.0 && beta1 >= 0.0) {
            return Err(Error::InvalidParameter(format!(
                "Robin coefficients need sigma0 > 0, sigma1 > 0, beta0 <= 0, beta1 >= 0 \
                 (got {sigma0}, {sigma1}, {beta0}, {beta1})"
            )));
        }
        Ok(Self {
            sigma0,
            sigma1,
            beta0,
            beta1,
        })
    }

    /// `u(a) = u(b) = 0`.
    pub fn dirichlet() -> Self {
        Self {
            sigma0: 1.0,
            sigma1: 1.0,
            beta0: 0.0,
            beta1: 0.0,
        }
    }

    /// Residuals `(σ0 u(a) + β0 u'(a), σ1 u(b) + β1 u'(b))` for given end values.
    pub fn residuals(&self, ua: f64, dua: f64, ub: f64, dub: f64) -> (f64, f64) {
        (
            self.sigma0 * ua + self.beta0 * dua,
            self.sigma1 * ub + self.beta1 * dub,
        )
    }
}

/// Solves the 2×2 system that makes `(x² + A x + B) T*_k` satisfy both Robin conditions.
pub fn robin_q_coeffs(k: usize, bc: &RobinBC, iv: &Interval) -> Result<(f64, f64)> {
    let (a, b) = (iv.a(), iv.b());
    let kk = (k * k) as f64;
    let sign = if k.is_multiple_of(2) { 1.0 } else { -1.0 };
    // T*_k and its derivative at the endpoints
    let (ta, dta) = (sign, -sign * kk * iv.scale());
    let (tb, dtb) = (1.0, kk * iv.scale());

    // row: coefficient of A, coefficient of B, right-hand side
    let row = |s: f64, be: f64, x: f64, t: f64, dt: f64| {
        let ca = s * x * t + be * (t + x * dt);
        let cb = s * t + be * dt;
        let rhs = -(s * x * x * t + be * (2.0 * x * t + x * x * dt));
        (ca, cb, rhs)
    };
    let (a11, a12, r1) = row(bc.sigma0, bc.beta0, a, ta, dta);
    let (a21, a22, r2) = row(bc.sigma1, bc.beta1, b, tb, dtb);
    let det = a11 * a22 - a12 * a21;
    let scale = a11.hypot(a12) * a21.hypot(a22);
    if !(det.abs() > 1e-12 * scale) {
        return Err(Error::SingularBoundarySystem { k, det });
    }
    let big_a = (r1 * a22 - a12 * r2) / det;
    let big_b = (a11 * r2 - r1 * a21) / det;
    Ok((big_a, big_b))
}

/// Closed-form `(A_k, B_k)`, kept as a cross-check for [`robin_q_coeffs`].
///
/// Returns `None` when the common denominator vanishes.
pub fn robin_q_coeffs_closed_form(k: usize, bc: &RobinBC, iv: &Interval) -> Option<(f64, f64)> {
    let (a, b) = (iv.a(), iv.b());
    let (s0, s1, b0, b1) = (bc.sigma0, bc.sigma1, bc.beta0, bc.beta1);
    let l = iv.length();
    let rh = iv.sum();
    let k2 = (k * k) as f64;
    let v = s0 * s1 * l * l
        - 4.0 * b0 * b1 * (k2 + 1.0) * k2
        - (2.0 * k2 + 1.0) * l * (s1 * b0 - s0 * b1);
    if v == 0.0 {
        return None;
    }
    let big_a = (2.0 * b0 * (s1 * l * (a + k2 * rh) + 2.0 * b1 * (k2 + 1.0) * k2 * rh)
        - s0 * l * (2.0 * b1 * (b + k2 * rh) + s1 * l * rh))
        / v;
    let big_b = (b1
        * (a * s0 * l * (-a + 2.0 * b * (k2 + 1.0))
            + 2.0 * b0 * (k2 + 1.0) * (l * l - 2.0 * a * b * k2))
        + s1 * b * l * (b0 * (b - 2.0 * a * (k2 + 1.0)) + a * s0 * l))
        / v;
    Some((big_a, big_b))
}

/// The RMCP1 basis `φ_0..φ_N` with its derivative-expansion data.
#[derive(Clone, Debug)]
pub struct Rmcp1Basis {
    iv: Interval,
    n: usize,
    bc: RobinBC,
    q_coeffs: Vec<(f64, f64)>,
    phis: Vec<Poly>,
    dphis: Vec<Poly>,
    h: DMatrix<f64>,
    /// `(e_0(n), e_1(n))`
    eps: Vec<(f64, f64)>,
}

/// Builds `φ_0..φ_N` and the derivative expansion by coefficient matching.
///
/// `φ_n'` has degree `n + 1`; the `φ_j` (degree `j + 2`) for `j < n` together with
/// `{x, 1}` span exactly that space, so matching the top Chebyshev coefficient
/// and peeling off `φ_{n-1}, φ_{n-2}, ...` recovers `a_j(n)` one at a time.
pub fn build_basis(n: usize, bc: &RobinBC, iv: &Interval) -> Result<Rmcp1Basis> {
    let mut q_coeffs = Vec::with_capacity(n + 1);
    let mut phis = Vec::with_capacity(n + 1);
    for k in 0..=n {
        let (ak, bk) = robin_q_coeffs(k, bc, iv)?;
        if let Some((ca, cb)) = robin_q_coeffs_closed_form(k, bc, iv) {
            let agree = |x: f64, y: f64| (x - y).abs() <= 1e-8 * x.abs().max(y.abs()).max(1.0);
            if !agree(ak, ca) || !agree(bk, cb) {
                log::debug!(
                    "closed-form Robin coefficients disagree for k={k}: solve=({ak}, {bk}) printed=({ca}, {cb})"
                );
            }
        }
        let q = Poly::monic_quadratic(*iv, ak, bk);
        phis.push(q.mul(&Poly::cheb(*iv, k))?);
        q_coeffs.push((ak, bk));
    }

    let dphis: Vec<Poly> = phis.iter().map(Poly::diff).collect();
    let mut h = DMatrix::zeros(n + 1, n + 1);
    let mut eps = Vec::with_capacity(n + 1);
    for (row, dphi) in dphis.iter().enumerate() {
        let mut r = dphi.clone();
        for j in (0..row).rev() {
            let phi = &phis[j];
            let lc = phi.coeff(j + 2);
            let cond = phi.coeff_norm() / lc.abs();
            if !(cond < 1e12) {
                return Err(Error::BasisDependence { n: row, cond });
            }
            let aj = r.coeff(j + 2) / lc;
            h[(row, j)] = aj;
            r = r.sub(&phi.scale(aj))?;
        }
        // r = r0 + r1 ξ with ξ = (2x - a - b)/(b - a)
        let (r0, r1) = (r.coeff(0), r.coeff(1));
        let e1 = r1 * iv.scale();
        let e0 = r0 - r1 * iv.sum() / iv.length();
        eps.push((e0, e1));
    }

    Ok(Rmcp1Basis {
        iv: *iv,
        n,
        bc: *bc,
        q_coeffs,
        phis,
        dphis,
        h,
        eps,
    })
}

impl Rmcp1Basis {
    pub fn interval(&self) -> &Interval {
        &self.iv
    }

    /// Truncation degree `N` (the basis has `N + 1` members).
    pub fn degree(&self) -> usize {
        self.n
    }

    pub fn len(&self) -> usize {
        self.n + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn bc(&self) -> &RobinBC {
        &self.bc
    }

    /// `(A_k, B_k)` for `k = 0..=N`.
    pub fn q_coeffs(&self) -> &[(f64, f64)] {
        &self.q_coeffs
    }

    pub fn phis(&self) -> &[Poly] {
        &self.phis
    }

    pub fn phi(&self, k: usize) -> &Poly {
        &self.phis[k]
    }

    pub fn dphi(&self, k: usize) -> &Poly {
        &self.dphis[k]
    }

    /// Operational matrix `H` (`h_ij = a_j(i)` for `i > j`).
    pub fn h(&self) -> &DMatrix<f64> {
        &self.h
    }

    /// `a_j(n)`.
    pub fn expansion_coeff(&self, n: usize, j: usize) -> f64 {
        self.h[(n, j)]
    }

    /// `(e_0(n), e_1(n))` for every `n`.
    pub fn remainders(&self) -> &[(f64, f64)] {
        &self.eps
    }

    /// `Φ(x) = [φ_0(x), ..., φ_N(x)]`.
    pub fn eval_all(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.phis.iter().map(|p| p.eval(x)))
    }

    /// `Φ'(x)`, evaluated directly from the differentiated polynomials.
    pub fn eval_deriv_all(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.dphis.iter().map(|p| p.eval(x)))
    }

    /// `ε(x) = [e_1(n) x + e_0(n)]_n`.
    pub fn remainder_vec(&self, x: f64) -> DVector<f64> {
        DVector::from_iterator(self.len(), self.eps.iter().map(|&(e0, e1)| e1 * x + e0))
    }

    /// Largest Robin residual over all basis members, each scaled by `max(1, ‖φ_k‖∞)`.
    pub fn max_boundary_residual(&self) -> f64 {
        let (a, b) = (self.iv.a(), self.iv.b());
        self.phis
            .iter()
            .zip(&self.dphis)
            .map(|(p, dp)| {
                let (ra, rb) = self
                    .bc
                    .residuals(p.eval(a), dp.eval(a), p.eval(b), dp.eval(b));
                ra.abs().max(rb.abs()) / p.sup_norm().max(1.0)
            })
            .fold(0.0, f64::max)
    }

    /// `H^m` and the evaluator for `η^(m)(x)`.
    pub fn operational_matrix(&self, m: usize) -> Result<OperationalMatrix> {
        if m == 0 {
            return Err(Error::InvalidParameter(
                "derivative order m must be >= 1".into(),
            ));
        }
        let dim = self.len();
        let mut powers = Vec::with_capacity(m + 1);
        powers.push(DMatrix::identity(dim, dim));
        for k in 1..=m {
            let next = &powers[k - 1] * &self.h;
            powers.push(next);
        }
        let e0 = DVector::from_iterator(dim, self.eps.iter().map(|e| e.0));
        let e1 = DVector::from_iterator(dim, self.eps.iter().map(|e| e.1));
        let hm = powers.pop().expect("m >= 1");
        Ok(OperationalMatrix {
            m,
            hm,
            powers,
            e0,
            e1,
        })
    }
}

/// `d^mΦ/dx^m = H^m Φ(x) + η^(m)(x)`.
#[derive(Clone, Debug)]
pub struct OperationalMatrix {
    m: usize,
    hm: DMatrix<f64>,
    /// `H^0 .. H^{m-1}`
    powers: Vec<DMatrix<f64>>,
    e0: DVector<f64>,
    e1: DVector<f64>,
}

impl OperationalMatrix {
    pub fn order(&self) -> usize {
        self.m
    }

    /// `H^m`.
    pub fn hm(&self) -> &DMatrix<f64> {
        &self.hm
    }

    /// `η^(m)(x) = Σ_{k<m} H^k ε^{(m-k-1)}(x)`; only the `ε` and `ε'` terms survive.
    pub fn eta(&self, x: f64) -> DVector<f64> {
        let m = self.m;
        let eps = &self.e1 * x + &self.e0;
        let mut out = &self.powers[m - 1] * eps;
        if m >= 2 {
            out += &self.powers[m - 2] * &self.e1;
        }
        out
    }
}

/// Zeros of `T*_{N+1}` on `iv`, in decreasing order.
pub fn collocation_points(n: usize, iv: &Interval) -> Vec<f64> {
    let np1 = (n + 1) as f64;
    (0..=n)
        .map(|k| {
            let theta = (2 * k + 1) as f64 * std::f64::consts::PI / (2.0 * np1);
            0.5 * (iv.sum() + iv.length() * theta.cos())
        })
        .collect()
}

/// `T*_{N+1}` at every collocation point; handy for checking the node set.
pub fn collocation_residual(n: usize, iv: &Interval) -> f64 {
    collocation_points(n, iv)
        .into_iter()
        .map(|x| cheb_eval(n + 1, x, iv).abs())
        .fold(0.0, f64::max)
}

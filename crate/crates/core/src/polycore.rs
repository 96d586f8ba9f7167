//! Polynomial arithmetic in the shifted Chebyshev basis on an interval `[a, b]`.
//!
//! A [`Poly`] stores coefficients `c_j` of `Σ c_j T*_j(x)`, where
//! `T*_j(x) = T_j((2x - a - b) / (b - a))`. Keeping everything in this basis
//! (instead of monomials) keeps products and derivatives of degree ~25
//! polynomials well conditioned on the interval. Evaluation uses Clenshaw's
//! recurrence, which is also valid outside `[a, b]`.

use crate::error::{Error, Result};

/// A closed interval `[a, b]` with `a < b`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Interval {
    a: f64,
    b: f64,
}

impl Interval {
    pub fn new(a: f64, b: f64) -> Result<Self> {
        if !(a.is_finite() && b.is_finite() && a < b) {
            return Err(Error::InvalidInterval { a, b });
        }
        Ok(Self { a, b })
    }

    pub fn a(&self) -> f64 {
        self.a
    }

    pub fn b(&self) -> f64 {
        self.b
    }

    /// `L = b - a`.
    pub fn length(&self) -> f64 {
        self.b - self.a
    }

    /// `r̂ = b + a`.
    pub fn sum(&self) -> f64 {
        self.b + self.a
    }

    /// Affine map of `x` onto the reference variable in `[-1, 1]`.
    pub fn to_reference(&self, x: f64) -> f64 {
        (2.0 * x - self.a - self.b) / (self.b - self.a)
    }

    /// `dξ/dx` for the reference map.
    pub fn scale(&self) -> f64 {
        2.0 / (self.b - self.a)
    }
}

/// `T*_k(x)` on `iv`, via the three-term recurrence (valid for any real `x`).
pub fn cheb_eval(k: usize, x: f64, iv: &Interval) -> f64 {
    let xi = iv.to_reference(x);
    match k {
        0 => 1.0,
        1 => xi,
        _ => {
            let (mut t0, mut t1) = (1.0, xi);
            for _ in 1..k {
                let t2 = 2.0 * xi * t1 - t0;
                t0 = t1;
                t1 = t2;
            }
            t1
        }
    }
}

/// A polynomial in shifted Chebyshev form on a fixed interval.
#[derive(Clone, Debug, PartialEq)]
pub struct Poly {
    iv: Interval,
    coeffs: Vec<f64>,
}

impl Poly {
    /// Builds a polynomial from Chebyshev coefficients, dropping exact trailing zeros.
    pub fn from_coeffs(iv: Interval, mut coeffs: Vec<f64>) -> Self {
        while coeffs.last() == Some(&0.0) {
            coeffs.pop();
        }
        Self { iv, coeffs }
    }

    pub fn zero(iv: Interval) -> Self {
        Self {
            iv,
            coeffs: Vec::new(),
        }
    }

    pub fn constant(iv: Interval, c: f64) -> Self {
        Self::from_coeffs(iv, vec![c])
    }

    /// `T*_k`.
    pub fn cheb(iv: Interval, k: usize) -> Self {
        let mut coeffs = vec![0.0; k + 1];
        coeffs[k] = 1.0;
        Self { iv, coeffs }
    }

    /// The identity polynomial `x`.
    pub fn identity(iv: Interval) -> Self {
        // x = (a + b)/2 + (b - a)/2 · ξ
        Self::from_coeffs(iv, vec![0.5 * iv.sum(), 0.5 * iv.length()])
    }

    /// `x^2 + p x + q`.
    pub fn monic_quadratic(iv: Interval, p: f64, q: f64) -> Self {
        let x = Self::identity(iv);
        let x2 = x.mul(&x).expect("same interval");
        x2.add(&x.scale(p))
            .and_then(|s| s.add(&Self::constant(iv, q)))
            .expect("same interval")
    }

    pub fn interval(&self) -> &Interval {
        &self.iv
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    /// Coefficient of `T*_j` (zero beyond the stored length).
    pub fn coeff(&self, j: usize) -> f64 {
        self.coeffs.get(j).copied().unwrap_or(0.0)
    }

    /// `None` for the zero polynomial.
    pub fn degree(&self) -> Option<usize> {
        self.coeffs.iter().rposition(|&c| c != 0.0)
    }

    pub fn is_zero(&self) -> bool {
        self.degree().is_none()
    }

    /// Clenshaw evaluation.
    pub fn eval(&self, x: f64) -> f64 {
        let xi = self.iv.to_reference(x);
        let (mut b1, mut b2) = (0.0, 0.0);
        for &c in self.coeffs.iter().skip(1).rev() {
            let b0 = 2.0 * xi * b1 - b2 + c;
            b2 = b1;
            b1 = b0;
        }
        self.coeff(0) + xi * b1 - b2
    }

    fn check(&self, other: &Self) -> Result<()> {
        if self.iv != other.iv {
            return Err(Error::IntervalMismatch);
        }
        Ok(())
    }

    pub fn add(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        let n = self.coeffs.len().max(other.coeffs.len());
        let coeffs = (0..n).map(|j| self.coeff(j) + other.coeff(j)).collect();
        Ok(Self::from_coeffs(self.iv, coeffs))
    }

    pub fn sub(&self, other: &Self) -> Result<Self> {
        self.add(&other.scale(-1.0))
    }

    pub fn scale(&self, s: f64) -> Self {
        Self::from_coeffs(self.iv, self.coeffs.iter().map(|c| c * s).collect())
    }

    /// Product, using `T_i T_j = (T_{i+j} + T_{|i-j|}) / 2`.
    pub fn mul(&self, other: &Self) -> Result<Self> {
        self.check(other)?;
        if self.is_zero() || other.is_zero() {
            return Ok(Self::zero(self.iv));
        }
        let mut out = vec![0.0; self.coeffs.len() + other.coeffs.len() - 1];
        for (i, &p) in self.coeffs.iter().enumerate() {
            if p == 0.0 {
                continue;
            }
            for (j, &q) in other.coeffs.iter().enumerate() {
                let h = 0.5 * p * q;
                out[i + j] += h;
                out[i.abs_diff(j)] += h;
            }
        }
        Ok(Self::from_coeffs(self.iv, out))
    }

    /// Derivative with respect to `x`.
    pub fn diff(&self) -> Self {
        let n = match self.degree() {
            None | Some(0) => return Self::zero(self.iv),
            Some(n) => n,
        };
        let c = &self.coeffs;
        let mut d = vec![0.0; n + 1];
        for k in (1..=n).rev() {
            d[k - 1] = d.get(k + 1).copied().unwrap_or(0.0) + 2.0 * k as f64 * c[k];
        }
        d[0] *= 0.5;
        d.truncate(n);
        let s = self.iv.scale();
        Self::from_coeffs(self.iv, d.into_iter().map(|v| v * s).collect())
    }

    /// `[p(x), p'(x), ..., p^(max_order)(x)]`.
    pub fn derivs_at(&self, x: f64, max_order: usize) -> Vec<f64> {
        let mut out = Vec::with_capacity(max_order + 1);
        let mut p = self.clone();
        for _ in 0..=max_order {
            out.push(p.eval(x));
            p = p.diff();
        }
        out
    }

    /// Sum of absolute Chebyshev coefficients; an upper bound for the sup norm on `[a, b]`.
    pub fn coeff_norm(&self) -> f64 {
        self.coeffs.iter().map(|c| c.abs()).sum()
    }

    /// Sup norm on `[a, b]` estimated on a dense Chebyshev-Lobatto grid.
    pub fn sup_norm(&self) -> f64 {
        let n = 4 * self.coeffs.len().max(4);
        (0..=n)
            .map(|i| {
                let xi = (std::f64::consts::PI * i as f64 / n as f64).cos();
                let x = 0.5 * (self.iv.sum() + self.iv.length() * xi);
                self.eval(x).abs()
            })
            .fold(0.0, f64::max)
    }
}

/// `T*_k^{(q)}(0; a, b)` from the terminating hypergeometric closed form
///
/// `k (-1)^{k-q} q! (k+q-1)! (4/(b-a))^q / ((2q)! (k-q)!) · ₂F₁(q-k, k+q; q+1/2; a/(a-b))`.
///
/// Orders above the degree give zero. `q = 0` falls back to plain evaluation.
pub fn cheb_deriv_at_zero(k: usize, q: usize, iv: &Interval) -> f64 {
    if q == 0 {
        return cheb_eval(k, 0.0, iv);
    }
    if q > k {
        return 0.0;
    }
    // prefactor, assembled as a product of ratios to avoid large factorials
    let mut pref = k as f64 * if (k - q).is_multiple_of(2) { 1.0 } else { -1.0 };
    // q! (k+q-1)! / ((2q)! (k-q)!) = Π_{i=1..q} i · Π_{i=k-q+1..k+q-1} i / Π_{i=1..2q} i
    let mut num: Vec<f64> = (1..=q).map(|i| i as f64).collect();
    num.extend((k - q + 1..=k + q - 1).map(|i| i as f64));
    let den: Vec<f64> = (1..=2 * q).map(|i| i as f64).collect();
    let (mut ni, mut di) = (num.iter(), den.iter());
    loop {
        match (ni.next(), di.next()) {
            (Some(n), Some(d)) => pref *= n / d,
            (Some(n), None) => pref *= n,
            (None, Some(d)) => pref /= d,
            (None, None) => break,
        }
    }
    pref *= (4.0 / iv.length()).powi(q as i32);

    // ₂F₁(q-k, k+q; q+1/2; z), finite since q - k <= 0
    let z = iv.a() / (iv.a() - iv.b());
    let (a1, b1, c1) = ((q as f64) - (k as f64), (k + q) as f64, q as f64 + 0.5);
    let mut term = 1.0;
    let mut sum = 1.0;
    for n in 0..(k - q) {
        let n = n as f64;
        term *= (a1 + n) * (b1 + n) / ((c1 + n) * (n + 1.0)) * z;
        sum += term;
    }
    pref * sum
}

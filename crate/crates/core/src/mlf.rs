//! Two-parameter Mittag-Leffler function `E_{σ,β}(z) = Σ_n z^n / Γ(σn + β)` on the
//! non-positive real axis.
//!
//! Small `|z|` uses the power series, large `|z|` the algebraic expansion
//! `E_{σ,β}(z) ~ -Σ_{n≥1} z^{-n} / Γ(β - σn)` (valid on the negative axis for
//! `0 < σ < 1`; for `σ = 1` the exponential term `z^{1-β} e^z` is added).
//! Each branch carries a running error estimate; a value is only returned when one
//! of them is below tolerance. For small `σ` there is a band of `|z|` where
//! neither is, and the evaluator reports it rather than guessing.

use crate::error::{Error, Result};
use crate::special::{ln_gamma_signed, rgamma};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MlfOptions {
    /// `|z|` below which the power series is tried first
    pub z_switch: f64,
    /// accepted error relative to `max(1, |E|)`
    pub tol: f64,
}

impl Default for MlfOptions {
    fn default() -> Self {
        Self {
            z_switch: 7.0,
            tol: 1e-13,
        }
    }
}

/// A branch value with its estimated absolute error.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Estimate {
    pub value: f64,
    pub error: f64,
}

impl Estimate {
    fn accepted(&self, tol: f64) -> bool {
        self.error.is_finite() && self.error <= tol * self.value.abs().max(1.0)
    }
}

/// `sign(x) / |Γ(x)| · |z|^n` without intermediate overflow.
fn scaled_rgamma(x: f64, n: f64, ln_abs_z: f64) -> f64 {
    if x <= 0.0 && x == x.floor() {
        return 0.0;
    }
    if n == 0.0 {
        return rgamma(x);
    }
    let (lg, sign) = ln_gamma_signed(x);
    sign * (n * ln_abs_z - lg).exp()
}

/// Power series with a roundoff estimate from the sum of term magnitudes.
pub fn taylor_branch(sigma: f64, beta: f64, z: f64) -> Estimate {
    if z == 0.0 {
        return Estimate {
            value: rgamma(beta),
            error: 0.0,
        };
    }
    let lz = z.abs().ln();
    let neg = z < 0.0;
    let (mut sum, mut comp, mut abs_sum) = (0.0f64, 0.0f64, 0.0f64);
    let mut small_run = 0;
    let mut last = f64::INFINITY;
    for n in 0..20_000usize {
        let mag = scaled_rgamma(sigma * n as f64 + beta, n as f64, lz);
        let term = if neg && n % 2 == 1 { -mag } else { mag };
        if !term.is_finite() {
            return Estimate {
                value: sum,
                error: f64::INFINITY,
            };
        }
        // Neumaier summation
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
        abs_sum += term.abs();
        // past the peak and negligible for a few consecutive terms
        if term.abs() <= last && term.abs() <= 1e-17 * (sum + comp).abs().max(f64::MIN_POSITIVE) {
            small_run += 1;
            if small_run >= 3 {
                let value = sum + comp;
                return Estimate {
                    value,
                    error: 4.0 * f64::EPSILON * abs_sum + 1e-17 * value.abs(),
                };
            }
        } else {
            small_run = 0;
        }
        if term != 0.0 {
            last = term.abs();
        }
    }
    Estimate {
        value: sum + comp,
        error: f64::INFINITY,
    }
}

/// Algebraic expansion for `z < 0`, truncated before its smallest term.
pub fn asymptotic_branch(sigma: f64, beta: f64, z: f64) -> Estimate {
    let bad = Estimate {
        value: f64::NAN,
        error: f64::INFINITY,
    };
    if !(z < 0.0) || sigma > 1.0 {
        return bad;
    }
    let mut value = 0.0;
    let mut abs_sum = 0.0;
    if sigma == 1.0 {
        // z^{1-β} e^z, real only for integer β
        let p = 1.0 - beta;
        if p != p.floor() {
            return bad;
        }
        let e = z.exp() * z.powi(p as i32);
        value += e;
        abs_sum += e.abs();
    }
    let lz = -z.abs().ln();
    let mut prev = f64::INFINITY;
    let mut error = f64::INFINITY;
    for n in 1..5_000usize {
        let mag = scaled_rgamma(beta - sigma * n as f64, n as f64, lz);
        // -z^{-n} / Γ(β - σn), z < 0
        let term = if n % 2 == 1 { mag } else { -mag };
        if term == 0.0 {
            continue;
        }
        if !term.is_finite() || term.abs() > prev {
            error = term.abs().min(prev);
            break;
        }
        value += term;
        abs_sum += term.abs();
        prev = term.abs();
        if term.abs() <= 1e-17 * value.abs() {
            error = term.abs();
            break;
        }
    }
    if prev == f64::INFINITY {
        // no algebraic terms at all (σ = 1 with integer β)
        error = 0.0;
    }
    Estimate {
        value,
        error: error + 4.0 * f64::EPSILON * abs_sum,
    }
}

type Branch = fn(f64, f64, f64) -> Estimate;

/// `E_{σ,β}(z)` for real `z ≤ 0` with the default options.
pub fn mittag_leffler(sigma: f64, beta: f64, z: f64) -> Result<f64> {
    mittag_leffler_with(sigma, beta, z, &MlfOptions::default())
}

/// `E_α(z) = E_{α,1}(z)`.
pub fn mittag_leffler1(alpha: f64, z: f64) -> Result<f64> {
    mittag_leffler(alpha, 1.0, z)
}

pub fn mittag_leffler_with(sigma: f64, beta: f64, z: f64, opts: &MlfOptions) -> Result<f64> {
    if !(sigma > 0.0) || !beta.is_finite() {
        return Err(Error::InvalidParameter(format!(
            "need sigma > 0 and finite beta (got {sigma}, {beta})"
        )));
    }
    if !(z <= 0.0) {
        return Err(Error::InvalidParameter(format!(
            "Mittag-Leffler evaluation supports z <= 0 only, got {z}"
        )));
    }
    let (first, second): (Branch, Branch) = if z.abs() <= opts.z_switch {
        (taylor_branch, asymptotic_branch)
    } else {
        (asymptotic_branch, taylor_branch)
    };
    let a = first(sigma, beta, z);
    if a.accepted(opts.tol) {
        return Ok(a.value);
    }
    let b = second(sigma, beta, z);
    if b.accepted(opts.tol) {
        return Ok(b.value);
    }
    let (taylor_limit, asymptotic_limit) = gap(sigma, beta, opts.tol);
    Err(Error::UnsupportedRegime {
        sigma,
        beta,
        z,
        taylor_limit,
        asymptotic_limit,
    })
}

/// Largest `|z|` the series accepts and smallest `|z|` the expansion accepts (bisection).
fn gap(sigma: f64, beta: f64, tol: f64) -> (f64, f64) {
    let bisect = |ok_low: bool, f: fn(f64, f64, f64) -> Estimate| {
        let (mut lo, mut hi) = (0.0f64, 1e3f64);
        for _ in 0..60 {
            let mid = 0.5 * (lo + hi);
            let good = f(sigma, beta, -mid).accepted(tol);
            if good == ok_low {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    };
    (
        bisect(true, taylor_branch),
        bisect(false, asymptotic_branch),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};

    #[test]
    fn exponential_case() {
        for z in [0.0, -0.5, -1.0, -3.0, -10.0, -40.0] {
            let e = mittag_leffler(1.0, 1.0, z).unwrap();
            assert!(
                (e - z.exp()).abs() <= 1e-13 * z.exp().max(1e-300) + 1e-16,
                "z={z}"
            );
        }
        assert!((mittag_leffler(1.0, 1.0, -1.0).unwrap() - 0.36787944117144233).abs() < 1e-15);
    }

    #[test]
    fn value_at_zero() {
        for (s, b) in [(0.3, 1.0), (0.7, 0.7), (0.5, 2.5)] {
            assert_eq!(mittag_leffler(s, b, 0.0).unwrap(), rgamma(b));
        }
    }

    #[test]
    fn half_order_matches_erfc_identity() {
        // E_{1/2}(z) = exp(z²) erfc(-z)
        for z in [-0.1f64, -0.5, -1.0, -1.5] {
            let want = (z * z).exp() * libm::erfc(-z);
            let got = mittag_leffler(0.5, 1.0, z).unwrap();
            assert!((got - want).abs() <= 1e-13, "z={z}: {got} vs {want}");
        }
        let e = mittag_leffler(0.5, 1.0, -1.0).unwrap();
        assert!((e - 0.427_583_576_155_807).abs() < 1e-13);
        for z in [-8.0f64, -12.0, -20.0] {
            let want = (z * z).exp() * libm::erfc(-z);
            let got = mittag_leffler(0.5, 1.0, z).unwrap();
            assert!((got - want).abs() <= 1e-13 * want.max(1.0), "z={z}");
        }
    }

    #[test]
    fn recurrence_in_beta() {
        let mut rng = rand::rngs::StdRng::seed_from_u64(2024);
        let mut checked = 0;
        while checked < 50 {
            let sigma: f64 = rng.gen_range(0.1..1.0);
            let beta: f64 = rng.gen_range(0.3..2.0);
            let z: f64 = -rng.gen_range(0.0..1.0f64).powi(2) * 20.0;
            let (Ok(lhs), Ok(next)) = (
                mittag_leffler(sigma, beta, z),
                mittag_leffler(sigma, beta + sigma, z),
            ) else {
                continue;
            };
            let rhs = z * next + rgamma(beta);
            assert!(
                (lhs - rhs).abs() <= 1e-10 * lhs.abs().max(1e-3),
                "sigma={sigma} beta={beta} z={z}: {lhs} vs {rhs}"
            );
            checked += 1;
        }
    }

    #[test]
    fn decreasing_on_negative_axis() {
        for sigma in [0.3, 0.5, 0.8] {
            let mut prev = f64::INFINITY;
            for i in 0..=40 {
                let t = i as f64 * 0.025;
                let e = mittag_leffler(sigma, 1.0, -t.powf(sigma)).unwrap();
                assert!(e < prev, "sigma={sigma} t={t}");
                prev = e;
            }
        }
    }

    #[test]
    fn branches_agree_where_both_are_trusted() {
        let mut compared = 0;
        for sigma in [0.6, 0.7, 0.8, 0.9, 1.0] {
            for i in 1..400 {
                let z = -(i as f64) * 0.05;
                let a = taylor_branch(sigma, 1.0, z);
                let b = asymptotic_branch(sigma, 1.0, z);
                if a.accepted(1e-10) && b.accepted(1e-10) {
                    assert!(
                        (a.value - b.value).abs() <= 1e-9 * a.value.abs().max(1.0),
                        "sigma={sigma} z={z}"
                    );
                    compared += 1;
                }
            }
        }
        assert!(compared > 0);
    }

    #[test]
    fn gap_is_reported() {
        match mittag_leffler(0.1, 1.0, -1.5) {
            Err(Error::UnsupportedRegime {
                taylor_limit,
                asymptotic_limit,
                ..
            }) => assert!(taylor_limit < 1.5 && asymptotic_limit > 1.5),
            other => panic!("expected a reported gap, got {other:?}"),
        }
        assert!(mittag_leffler(0.5, 1.0, 0.5).is_err());
        assert!(mittag_leffler(0.0, 1.0, -0.5).is_err());
    }
}

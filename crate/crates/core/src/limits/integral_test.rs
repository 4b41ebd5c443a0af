//! The boundary family `φ(t) = (2LLt + a LLLt + b LLLLt)^{1/2}` and the series
//! `I_d(φ) = Σ n⁻¹ φ(n)^d exp(-φ(n)²/2)`.
//!
//! With every iterated log past its floor the term is
//! `n⁻¹ (Ln)⁻¹ (LLn)^{-(a-d)/2} (LLLn)^{-b/2} (2 + o(1))^{d/2}`, so the series
//! converges iff `a > d + 2`, or `a = d + 2` and `b > 2`.
//!
//! Partial sums up to `10^9` cannot see `b` (`LLLLn` is still on its floor
//! there), so the numerical oracle continues the sum as an integral in the
//! variable `w = LLLx`, where `dx / (x Lx) = e^w dw` and the summand becomes
//! `g(w) = (2e^w + a w + b L(w))^{d/2} e^{w(1 - a/2)} e^{-b L(w)/2}`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::iterlog::{ll, lll, llll, log_e};
use crate::quadrature::{integrate, integrate_pieces, QuadratureError, Tolerance};
use crate::statistics::Boundary;

/// Largest horizon for [`integral_test_partial_sums`].
pub const MAX_PARTIAL_SUM_N: u64 = 1_000_000_000;
/// Terms up to here are added one by one.
const EXACT_LIMIT: u64 = 1_000_000;
/// Last `w = LLLx` of the continued tail.
const TAIL_W_MAX: f64 = 1024.0;
/// A tail whose dyadic increments shrink by less than this exponent is divergent.
const EXPONENT_TOL: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PhiError {
    #[error("φ² is negative at t = {0}")]
    NegativeRadicand(f64),
    #[error("parameters must be finite and d >= 1")]
    Parameters,
    #[error("n_max must be in 1..={MAX_PARTIAL_SUM_N}, got {0}")]
    Horizon(u64),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PhiFamily {
    pub a: f64,
    pub b: f64,
    pub d: usize,
}

impl PhiFamily {
    pub fn new(a: f64, b: f64, d: usize) -> Result<Self, PhiError> {
        if !(a.is_finite() && b.is_finite()) || d == 0 {
            return Err(PhiError::Parameters);
        }
        Ok(PhiFamily { a, b, d })
    }

    /// `φ(t)² = 2LLt + a LLLt + b LLLLt`, possibly negative.
    pub fn radicand(&self, t: f64) -> f64 {
        2.0 * ll(t) + self.a * lll(t) + self.b * llll(t)
    }

    pub fn phi(&self, t: f64) -> Result<f64, PhiError> {
        let r = self.radicand(t);
        if r >= 0.0 {
            Ok(r.sqrt())
        } else {
            Err(PhiError::NegativeRadicand(t))
        }
    }
}

impl Boundary for PhiFamily {
    fn phi_squared(&self, t: f64) -> f64 {
        self.radicand(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Convergence {
    Convergent,
    Divergent,
}

/// Closed-form verdict on `I_d(φ)`; the boundary case `a = d + 2, b = 2` is the
/// harmonic series in `LLLn` and diverges.
pub fn integral_test_classify(phi: &PhiFamily) -> Convergence {
    let critical = phi.d as f64 + 2.0;
    if phi.a > critical || (phi.a == critical && phi.b > 2.0) {
        Convergence::Convergent
    } else {
        Convergence::Divergent
    }
}

/// `t⁻¹ φ(t)^d exp(-φ(t)²/2)`.
pub fn integral_test_term(phi: &PhiFamily, t: f64) -> Result<f64, PhiError> {
    let r = phi.radicand(t);
    if r < 0.0 {
        return Err(PhiError::NegativeRadicand(t));
    }
    Ok((-t.ln() + 0.5 * phi.d as f64 * r.ln() - 0.5 * r).exp())
}

/// The summand per unit of `log x`: `x · term(x)` at `x = e^u`.
fn log_density(phi: &PhiFamily, u: f64) -> f64 {
    let x = u.exp();
    let r = phi.radicand(x);
    (0.5 * phi.d as f64 * r.ln() - 0.5 * r).exp()
}

/// `log g(w)` for the tail in `w = LLLx` (valid once `w >= 1`).
fn log_tail_density(phi: &PhiFamily, w: f64) -> f64 {
    let lw = log_e(w);
    let extra = phi.a * w + phi.b * lw;
    // log(2e^w + extra) without forming e^w
    let log_radicand = w + (2.0 + extra * (-w).exp()).ln();
    0.5 * phi.d as f64 * log_radicand + w * (1.0 - phi.a / 2.0) - phi.b * lw / 2.0
}

/// `log ∫_lo^hi g(w) dw`.
fn log_tail_integral(phi: &PhiFamily, lo: f64, hi: f64) -> Result<f64, PhiError> {
    let m = log_tail_density(phi, lo).max(log_tail_density(phi, hi));
    let tol = Tolerance { abs: 0.0, rel: 1e-12, max_subdivisions: 4000 };
    let v = integrate(|w| (log_tail_density(phi, w) - m).exp(), lo, hi, tol)?;
    Ok(m + v.ln())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct PartialSum {
    pub n: u64,
    pub sum: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailIncrement {
    pub w_lo: f64,
    pub w_hi: f64,
    /// `log ∫_{w_lo}^{w_hi} g`.
    pub log_increment: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PartialSumReport {
    pub phi: PhiFamily,
    /// `Σ_{k<=n}` at `n = 10^j` and at `n_max`.
    pub checkpoints: Vec<PartialSum>,
    /// Continuation past `n_max` over doubling ranges of `w = LLLx`.
    pub tail: Vec<TailIncrement>,
    /// `log₂` of the ratio of the last two tail increments: the growth
    /// exponent of the partial sums in `LLLn` (`1 - b/2` on the critical line).
    pub tail_exponent: f64,
    pub verdict: Convergence,
}

/// Euler–Maclaurin step: `Σ_{k=lo+1}^{hi} f(k)`.
fn block_sum(phi: &PhiFamily, lo: u64, hi: u64) -> Result<f64, PhiError> {
    let (x0, x1) = (lo as f64, hi as f64);
    let kink = std::f64::consts::E.exp();
    let tol = Tolerance { abs: 0.0, rel: 1e-13, max_subdivisions: 2000 };
    let integral = integrate_pieces(|u| log_density(phi, u), x0.ln(), x1.ln(), &[kink], tol)?;
    let f = |x: f64| integral_test_term(phi, x);
    let df = |x: f64| -> Result<f64, PhiError> {
        let h = 1e-3 * x;
        Ok((f(x + h)? - f(x - h)?) / (2.0 * h))
    };
    Ok(integral + (f(x1)? - f(x0)?) / 2.0 + (df(x1)? - df(x0)?) / 12.0)
}

/// Partial sums of `I_d(φ)` to `n_max` and the continued tail beyond it.
///
/// The verdict reads the tail: convergent iff the last dyadic increment
/// exponent is below `-1e-6`.
pub fn integral_test_partial_sums(phi: &PhiFamily, n_max: u64) -> Result<PartialSumReport, PhiError> {
    if n_max == 0 || n_max > MAX_PARTIAL_SUM_N {
        return Err(PhiError::Horizon(n_max));
    }
    let mut checkpoints = Vec::new();
    let mut sum = 0.0f64;
    let mut comp = 0.0f64;
    let mut next_mark = 1u64;
    for k in 1..=n_max.min(EXACT_LIMIT) {
        let term = integral_test_term(phi, k as f64)?;
        let y = term - comp;
        let t = sum + y;
        comp = (t - sum) - y;
        sum = t;
        if k == next_mark {
            checkpoints.push(PartialSum { n: k, sum });
            next_mark *= 10;
        }
    }
    let mut at = n_max.min(EXACT_LIMIT);
    while at < n_max {
        let to = (at * 10).min(n_max);
        sum += block_sum(phi, at, to)?;
        at = to;
        checkpoints.push(PartialSum { n: at, sum });
    }
    if checkpoints.last().map(|c| c.n) != Some(n_max) {
        checkpoints.push(PartialSum { n: n_max, sum });
    }

    let mut tail = Vec::new();
    let mut w = lll(n_max as f64).max(1.0);
    while w < TAIL_W_MAX {
        let hi = (2.0 * w).min(TAIL_W_MAX);
        tail.push(TailIncrement { w_lo: w, w_hi: hi, log_increment: log_tail_integral(phi, w, hi)? });
        w = hi;
    }
    // Compare two full doublings.
    let full: Vec<&TailIncrement> = tail.iter().filter(|t| (t.w_hi / t.w_lo - 2.0).abs() < 1e-12).collect();
    let tail_exponent = match full.as_slice() {
        [.., p, q] => (q.log_increment - p.log_increment) / std::f64::consts::LN_2,
        _ => f64::NAN,
    };
    let verdict = if tail_exponent < -EXPONENT_TOL { Convergence::Convergent } else { Convergence::Divergent };
    Ok(PartialSumReport { phi: *phi, checkpoints, tail, tail_exponent, verdict })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::E;

    #[test]
    fn classifier_examples() {
        let c = |a, b, d| integral_test_classify(&PhiFamily::new(a, b, d).unwrap());
        assert_eq!(c(4.0, 0.0, 1), Convergence::Convergent);
        assert_eq!(c(3.0, 0.0, 1), Convergence::Divergent);
        assert_eq!(c(4.0, 3.0, 2), Convergence::Convergent);
        assert_eq!(c(4.0, 2.0, 2), Convergence::Divergent);
    }

    #[test]
    fn term_at_double_exponential() {
        let phi = PhiFamily::new(0.0, 0.0, 1).unwrap();
        let want = (-E).exp() * 2f64.sqrt() * (-1f64).exp();
        assert!((integral_test_term(&phi, E.powf(E)).unwrap() - want).abs() < 1e-15);
    }

    #[test]
    fn negative_radicand_reported() {
        let phi = PhiFamily::new(-10.0, 0.0, 1).unwrap();
        assert!(phi.phi(100.0).is_err());
        assert!(integral_test_term(&phi, 100.0).is_err());
        assert!(PhiFamily::new(f64::NAN, 0.0, 1).is_err());
    }

    #[test]
    fn block_sum_matches_direct_sum() {
        let phi = PhiFamily::new(3.0, 1.0, 2).unwrap();
        let direct: f64 = (1001..=200_000u64).map(|k| integral_test_term(&phi, k as f64).unwrap()).sum();
        let em = block_sum(&phi, 1000, 200_000).unwrap();
        assert!((em - direct).abs() < 1e-10 * direct, "{em} vs {direct}");
    }

    #[test]
    fn tail_density_matches_change_of_variables() {
        // g(w) dw = term(x) dx at x = exp(exp(e^w)).
        let phi = PhiFamily::new(3.5, 1.5, 2).unwrap();
        for &w in &[1.0f64, 1.2, 1.5, 1.7] {
            let x = w.exp().exp().exp();
            let dx_dw = x * w.exp().exp() * w.exp();
            let want = integral_test_term(&phi, x).unwrap() * dx_dw;
            let got = log_tail_density(&phi, w).exp();
            assert!((got - want).abs() < 1e-9 * want, "w = {w}: {got} vs {want}");
        }
    }

    #[test]
    fn oracle_agrees_on_critical_line() {
        for d in 1..=3usize {
            let a = d as f64 + 2.0;
            for b in [0.0, 1.0, 2.0, 3.0, 4.0] {
                let phi = PhiFamily::new(a, b, d).unwrap();
                let r = integral_test_partial_sums(&phi, 10_000).unwrap();
                assert_eq!(r.verdict, integral_test_classify(&phi), "d={d} b={b}");
                assert!((r.tail_exponent - (1.0 - b / 2.0)).abs() < 0.05, "d={d} b={b}: {}", r.tail_exponent);
            }
        }
    }

    #[test]
    fn checkpoints_are_increasing() {
        let phi = PhiFamily::new(4.0, 0.0, 1).unwrap();
        let r = integral_test_partial_sums(&phi, 50_000).unwrap();
        assert_eq!(r.checkpoints.last().unwrap().n, 50_000);
        assert!(r.checkpoints.windows(2).all(|w| w[1].sum > w[0].sum));
        assert!(integral_test_partial_sums(&phi, 0).is_err());
        assert!(integral_test_partial_sums(&phi, MAX_PARTIAL_SUM_N + 1).is_err());
    }
}

//! Gaussian norm tails and the inequalities built on them.

use serde::Serialize;
use thiserror::Error;

use crate::quadrature::{integrate, integrate_pieces, QuadratureError, Tolerance};
use crate::special::{erfc, gamma_q, normal_sf, SpecialError};

use std::f64::consts::{FRAC_PI_2, PI};

#[derive(Debug, Clone, PartialEq, Error)]
pub enum LimitError {
    #[error("sigma must lie in (0, 1), got {0}")]
    Sigma(f64),
    #[error("invalid grid: {0}")]
    Grid(&'static str),
    #[error("level must be >= 0, got {0}")]
    Level(f64),
    #[error("trace and largest eigenvalue must be > 0")]
    Covariance,
    #[error(transparent)]
    Special(#[from] SpecialError),
    #[error(transparent)]
    Quadrature(#[from] QuadratureError),
}

/// `P{|N(0, I_d)| >= t} = Q(d/2, t²/2)`.
pub fn chi_norm_tail(d: usize, t: f64) -> Result<f64, LimitError> {
    if !(t >= 0.0) {
        return Err(LimitError::Level(t));
    }
    if d == 0 {
        return Err(LimitError::Grid("dimension must be >= 1"));
    }
    Ok(gamma_q(d as f64 / 2.0, t * t / 2.0)?)
}

/// Range of `P{|N(0, I_d)| >= t} / (t^{d-2} e^{-t²/2})` over a grid.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Envelope {
    pub d: usize,
    pub c1_hat: f64,
    pub c2_hat: f64,
}

/// Empirical constants of the two-sided bound `C1 t^{d-2} e^{-t²/2} <= tail <= C2 ...`
/// on a grid inside `[2d, 12]`.
pub fn eq42_envelope(d: usize, t_grid: &[f64]) -> Result<Envelope, LimitError> {
    let lo = 2.0 * d as f64;
    if t_grid.is_empty() || t_grid.iter().any(|&t| !(lo..=12.0).contains(&t)) {
        return Err(LimitError::Grid("levels must lie in [2d, 12]"));
    }
    let mut c1 = f64::INFINITY;
    let mut c2 = 0.0f64;
    for &t in t_grid {
        let ratio = chi_norm_tail(d, t)? / (t.powi(d as i32 - 2) * (-t * t / 2.0).exp());
        c1 = c1.min(ratio);
        c2 = c2.max(ratio);
    }
    Ok(Envelope { d, c1_hat: c1, c2_hat: c2 })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct TailBound {
    /// `exp(-x²/(8 σ²_max))`.
    pub bound_a: f64,
    /// Whether `x >= 2 E|Y|²`, the range where `bound_a` holds.
    pub a_applicable: bool,
    /// `2 exp(-x²/(8 E|Y|²))`, valid for every `x >= 0`.
    pub bound_b: f64,
}

/// Tail bounds for `P{|Y| >= x}`, `Y ~ N(0, Σ)`, from `trace(Σ)` and `λ_max(Σ)`.
pub fn gaussian_norm_tail_bound(x: f64, trace: f64, sigma2_max: f64) -> Result<TailBound, LimitError> {
    if !(trace > 0.0 && sigma2_max > 0.0) {
        return Err(LimitError::Covariance);
    }
    Ok(TailBound {
        bound_a: (-x * x / (8.0 * sigma2_max)).exp(),
        a_applicable: x >= 2.0 * trace,
        bound_b: 2.0 * (-x * x / (8.0 * trace)).exp(),
    })
}

fn check_sigma(sigma: f64) -> Result<(), LimitError> {
    if sigma > 0.0 && sigma < 1.0 {
        Ok(())
    } else {
        Err(LimitError::Sigma(sigma))
    }
}

fn lem52_tolerance() -> Tolerance {
    Tolerance { abs: 1e-14, rel: 1e-12, max_subdivisions: 4000 }
}

/// `h(z)/h₁(z)` where `h₁` is the χ²₁ density and `h` the density of
/// `η₁² + σ² η₂²`.
///
/// From the convolution,
/// `h/h₁ = (√(2π) σ)⁻¹ ∫_0^z (1 - y/z)^{-1/2} y^{-1/2} e^{-κy} dy`, `κ = (σ⁻² - 1)/2`,
/// and `y = z sin²θ` turns it into `2√z/(√(2π) σ) ∫_0^{π/2} e^{-κ z sin²θ} dθ`.
pub fn lem52_ratio_at(sigma: f64, z: f64) -> Result<f64, LimitError> {
    check_sigma(sigma)?;
    if !(z > 0.0) {
        return Err(LimitError::Grid("z must be positive"));
    }
    let kz = 0.5 * (sigma.powi(-2) - 1.0) * z;
    // The integrand is a bump of width ~ 1/√(κz) at θ = 0.
    let width = (1.0 / kz.max(1e-300)).sqrt();
    let breaks: Vec<f64> = [width, 4.0 * width, 16.0 * width].into_iter().filter(|&b| b < FRAC_PI_2).collect();
    let integral =
        integrate_pieces(|th: f64| (-kz * th.sin().powi(2)).exp(), 0.0, FRAC_PI_2, &breaks, lem52_tolerance())?;
    Ok(2.0 * z.sqrt() / ((2.0 * PI).sqrt() * sigma) * integral)
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lem52Report {
    pub sigma: f64,
    pub max_ratio: f64,
    pub argmax_z: f64,
    /// `2 / √(1 - σ²)`.
    pub bound: f64,
    pub holds: bool,
}

/// Largest `h(z)/h₁(z)` over the grid, compared against `2/√(1-σ²)`.
pub fn lem52_ratio(sigma: f64, z_grid: &[f64]) -> Result<Lem52Report, LimitError> {
    check_sigma(sigma)?;
    if z_grid.is_empty() {
        return Err(LimitError::Grid("empty z grid"));
    }
    let mut max_ratio = f64::NEG_INFINITY;
    let mut argmax_z = z_grid[0];
    for &z in z_grid {
        let r = lem52_ratio_at(sigma, z)?;
        if r > max_ratio {
            max_ratio = r;
            argmax_z = z;
        }
    }
    let bound = 2.0 / (1.0 - sigma * sigma).sqrt();
    Ok(Lem52Report { sigma, max_ratio, argmax_z, bound, holds: max_ratio <= bound })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Lem52TailCheck {
    /// `∫_{t²}^∞ h = P{η₁² + σ²η₂² >= t²}`.
    pub lhs: f64,
    /// `2/√(1-σ²) ∫_{t²}^∞ h₁`.
    pub rhs: f64,
    pub holds: bool,
}

/// Integrated form of the density bound at level `t`.
///
/// Conditioning on `η₂ = u`: `P{η₁² >= t² - σ²u²} = erfc(√((t² - σ²u²)/2))`
/// for `|u| < t/σ` and 1 beyond; `u = (t/σ) sin θ` smooths the endpoint.
pub fn lem52_tail_check(sigma: f64, t: f64) -> Result<Lem52TailCheck, LimitError> {
    check_sigma(sigma)?;
    if !(t >= 0.0) {
        return Err(LimitError::Level(t));
    }
    let phi = |u: f64| (-u * u / 2.0).exp() / (2.0 * PI).sqrt();
    let r = t / sigma;
    let inner = integrate(
        |th: f64| {
            let (s, c) = th.sin_cos();
            let u = r * s;
            phi(u) * erfc(t * c / std::f64::consts::SQRT_2) * r * c
        },
        0.0,
        FRAC_PI_2,
        lem52_tolerance(),
    )?;
    let lhs = 2.0 * inner + 2.0 * normal_sf(r);
    let rhs = 2.0 / (1.0 - sigma * sigma).sqrt() * erfc(t / std::f64::consts::SQRT_2);
    Ok(Lem52TailCheck { lhs, rhs, holds: lhs <= rhs })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::special::normal_sf;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;
    use rand_distr::{Distribution, StandardNormal};

    #[test]
    fn chi_tail_closed_forms() {
        for &t in &[0.0, 0.5, 1.0, 3.0, 7.5, 12.0] {
            assert!((chi_norm_tail(2, t).unwrap() - (-t * t / 2.0).exp()).abs() < 1e-14);
            assert!((chi_norm_tail(1, t).unwrap() - 2.0 * normal_sf(t)).abs() < 1e-14);
        }
        assert!(chi_norm_tail(2, -1.0).is_err());
    }

    #[test]
    fn chi_tail_three_dimensions() {
        // 2(1 - Φ(t)) + 2t φ(t) at t = 2, evaluated to 30 digits.
        assert!((chi_norm_tail(3, 2.0).unwrap() - 0.261_464_129_949_110_62).abs() < 1e-13);
        // Monte Carlo cross-check
        let mut rng = ChaCha8Rng::seed_from_u64(42);
        let n = 2_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let r2: f64 = (0..3).map(|_| StandardNormal.sample(&mut rng)).map(|x: f64| x * x).sum();
            hits += (r2 >= 4.0) as u64;
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - chi_norm_tail(3, 2.0).unwrap()).abs() < 4.0 * se);
    }

    #[test]
    fn chi_tail_monotone_in_t_and_d() {
        for d in 1..6 {
            let mut prev = 1.0 + 1e-12;
            for i in 0..60 {
                let t = i as f64 * 0.2;
                let p = chi_norm_tail(d, t).unwrap();
                assert!(p < prev || (i == 0 && p == 1.0));
                prev = p;
                if t > 0.0 {
                    assert!(chi_norm_tail(d + 1, t).unwrap() > p);
                }
            }
        }
    }

    #[test]
    fn envelope_examples() {
        let grid: Vec<f64> = (0..=80).map(|i| 4.0 + 8.0 * i as f64 / 80.0).collect();
        let e = eq42_envelope(2, &grid).unwrap();
        assert!((e.c1_hat - 1.0).abs() < 1e-12 && (e.c2_hat - 1.0).abs() < 1e-12);
        let grid1: Vec<f64> = (0..=50).map(|i| 2.0 + 10.0 * i as f64 / 50.0).collect();
        let e = eq42_envelope(1, &grid1).unwrap();
        // 2(1-Φ(t)) t e^{t²/2} increases toward √(2/π).
        assert!(e.c1_hat > 0.0 && e.c2_hat < (2.0 / PI).sqrt());
        let first = 2.0 * normal_sf(2.0) * 2.0 * 2f64.exp();
        assert!((e.c1_hat - first).abs() < 1e-12);
        let grid3: Vec<f64> = (0..=30).map(|i| 6.0 + 0.2 * i as f64).collect();
        let e = eq42_envelope(3, &grid3).unwrap();
        assert!(e.c1_hat > 0.0 && e.c1_hat <= e.c2_hat && e.c2_hat.is_finite());
        assert!(eq42_envelope(3, &[5.0]).is_err());
        assert!(eq42_envelope(1, &[13.0]).is_err());
    }

    #[test]
    fn tail_bound_examples() {
        let b = gaussian_norm_tail_bound(0.0, 1.0, 1.0).unwrap();
        assert_eq!(b.bound_b, 2.0);
        assert!(!b.a_applicable);
        let b = gaussian_norm_tail_bound(4.0, 1.0, 1.0).unwrap();
        assert!((b.bound_a - (-2f64).exp()).abs() < 1e-16);
        assert!(b.a_applicable);
        assert!(gaussian_norm_tail_bound(1.0, 0.0, 1.0).is_err());
    }

    #[test]
    fn tail_bound_dominates_isotropic_monte_carlo() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let n = 1_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let r2: f64 = (0..2).map(|_| StandardNormal.sample(&mut rng)).map(|x: f64| x * x).sum();
            hits += (r2 >= 36.0) as u64;
        }
        let freq = hits as f64 / n as f64;
        assert!(freq <= gaussian_norm_tail_bound(6.0, 2.0, 1.0).unwrap().bound_b);
    }

    /// `e^{-x} I₀(x)` by its power series, summed in logs.
    fn scaled_bessel_i0(x: f64) -> f64 {
        let mut log_term = -x;
        let mut total = log_term.exp();
        let mut k = 0.0;
        loop {
            k += 1.0;
            log_term += 2.0 * (x / 2.0).ln() - 2.0 * f64::ln(k);
            let term = log_term.exp();
            total += term;
            if k > x && term < 1e-18 * total {
                return total;
            }
        }
    }

    #[test]
    fn lem52_matches_bessel_closed_form() {
        // ∫_0^{π/2} e^{-a sin²θ} dθ = (π/2) e^{-a/2} I₀(a/2).
        for &sigma in &[0.2f64, 0.5, 0.8, 0.95] {
            for &z in &[0.01, 0.3, 1.0, 5.0, 40.0] {
                let x = 0.25 * (sigma.powi(-2) - 1.0) * z;
                if x > 300.0 {
                    continue;
                }
                let want = (PI * z / 2.0).sqrt() / sigma * scaled_bessel_i0(x);
                let got = lem52_ratio_at(sigma, z).unwrap();
                assert!((got - want).abs() < 1e-11 * want, "σ={sigma} z={z}: {got} vs {want}");
            }
        }
    }

    #[test]
    fn lem52_bound_holds() {
        let grid: Vec<f64> = (0..=40).map(|i| 0.1 * 500f64.powf(i as f64 / 40.0)).collect();
        let r = lem52_ratio(0.5, &grid).unwrap();
        assert!(r.holds);
        assert!(r.max_ratio <= 2.0 / 0.75f64.sqrt());
        // As z -> ∞ the ratio tends to 1/√(1-σ²) from above (e^{-x}I₀(x)√(2πx) = 1 + 1/(8x) + ...).
        let limit = 1.0 / 0.75f64.sqrt();
        let far = lem52_ratio_at(0.5, 1e6).unwrap();
        assert!(far > limit && far - limit < 1e-5 * limit, "{far}");
        assert!(r.max_ratio > limit);
        assert!(lem52_ratio(1.0, &grid).is_err());
    }

    #[test]
    fn lem52_small_sigma_limit() {
        // h -> h₁ pointwise as σ -> 0 for fixed z.
        let r = lem52_ratio_at(1e-4, 3.0).unwrap();
        assert!((r - 1.0).abs() < 1e-3, "{r}");
    }

    #[test]
    fn lem52_tail_form() {
        let c = lem52_tail_check(0.8, 3.0).unwrap();
        assert!(c.holds);
        // Monte Carlo for the left side.
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let n = 2_000_000;
        let mut hits = 0u64;
        for _ in 0..n {
            let a: f64 = StandardNormal.sample(&mut rng);
            let b: f64 = StandardNormal.sample(&mut rng);
            hits += (a * a + 0.64 * b * b >= 9.0) as u64;
        }
        let p = hits as f64 / n as f64;
        let se = (p * (1.0 - p) / n as f64).sqrt();
        assert!((p - c.lhs).abs() < 4.0 * se, "{p} vs {}", c.lhs);
    }
}

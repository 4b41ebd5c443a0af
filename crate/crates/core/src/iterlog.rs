//! Iterated logarithms and the scalar normalizing sequences.
//!
//! `L(t) = ln(max(t, e))`, so every iterate is at least 1 and all of them are
//! defined on `[0, ∞)`. The normalizers follow the classical one-dimensional
//! form and its `d`-dimensional extension:
//!
//! ```text
//! a_n     = sqrt(2 LLn)
//! b_{d,n} = 2 LLn + d LLLn / 2 - ln Γ(d/2)
//! ```

use std::f64::consts::E;

use thiserror::Error;

use crate::special::ln_gamma;

#[derive(Debug, Clone, Copy, PartialEq, Error)]
pub enum IterlogError {
    #[error("iterated logarithm needs t >= 0, got {0}")]
    Negative(f64),
    #[error("iterated logarithm depth must be 1..=4, got {0}")]
    Depth(u32),
}

/// `L(t) = ln(t ∨ e)`.
#[inline]
pub fn log_e(t: f64) -> f64 {
    if t > E {
        t.ln()
    } else {
        1.0
    }
}

#[inline]
pub fn ll(t: f64) -> f64 {
    log_e(log_e(t))
}

#[inline]
pub fn lll(t: f64) -> f64 {
    log_e(ll(t))
}

#[inline]
pub fn llll(t: f64) -> f64 {
    log_e(lll(t))
}

/// Depth-fold composition of `L` at a real level.
pub fn iterlog(t: f64, depth: u32) -> Result<f64, IterlogError> {
    if !(t >= 0.0) {
        return Err(IterlogError::Negative(t));
    }
    match depth {
        1 => Ok(log_e(t)),
        2 => Ok(ll(t)),
        3 => Ok(lll(t)),
        4 => Ok(llll(t)),
        other => Err(IterlogError::Depth(other)),
    }
}

/// Scale and centering for the extreme statistic at horizon `level` in dimension `dim`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct NormalizerSet {
    pub level: f64,
    pub dim: usize,
    pub a_n: f64,
    pub b_dn: f64,
}

/// Normalizers at an integer horizon.
pub fn normalizers(n: u64, dim: usize) -> NormalizerSet {
    normalizers_at(n as f64, dim)
}

/// Normalizers evaluated at a real level; used where the iterated logs are
/// pinned to exact values (e.g. `t = e^e`).
pub fn normalizers_at(t: f64, dim: usize) -> NormalizerSet {
    assert!(dim >= 1, "dimension must be positive");
    let ll_t = ll(t);
    NormalizerSet {
        level: t,
        dim,
        a_n: (2.0 * ll_t).sqrt(),
        b_dn: 2.0 * ll_t + dim as f64 * lll(t) / 2.0 - ln_gamma(dim as f64 / 2.0),
    }
}

/// Constant in the centering of the sup-type statistic: `ln(3 / √8)`.
pub fn kls_constant() -> f64 {
    (3.0 / 8f64.sqrt()).ln()
}

/// Scale and centering of the statistic
/// `2LLn (sup_k |S_k| / sqrt(2k LLk) - 1) - 3/2 LLLn + LLLLn + ln(3/√8)`,
/// written as `scale * (sup - 1) - center`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct KlsNormalizer {
    pub scale: f64,
    pub center: f64,
}

impl KlsNormalizer {
    pub fn apply(&self, sup: f64) -> f64 {
        self.scale * (sup - 1.0) - self.center
    }
}

pub fn kls_normalizer(n: u64) -> KlsNormalizer {
    let t = n as f64;
    KlsNormalizer { scale: 2.0 * ll(t), center: 1.5 * lll(t) - llll(t) - kls_constant() }
}

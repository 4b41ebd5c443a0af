use rand::Rng;
use serde::{Deserialize, Serialize};

/// Standard Gumbel law translated by `shift`: `F(y) = exp(-exp(-(y - shift)))`.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct GumbelLaw {
    pub shift: f64,
}

impl GumbelLaw {
    pub fn standard() -> Self {
        GumbelLaw { shift: 0.0 }
    }

    pub fn shifted(shift: f64) -> Self {
        GumbelLaw { shift }
    }

    pub fn cdf(&self, y: f64) -> f64 {
        (-(-(y - self.shift)).exp()).exp()
    }

    /// Inverse of [`cdf`](Self::cdf) on `(0, 1)`; `±∞` at the endpoints.
    pub fn quantile(&self, p: f64) -> f64 {
        if p <= 0.0 {
            f64::NEG_INFINITY
        } else if p >= 1.0 {
            f64::INFINITY
        } else {
            self.shift - (-p.ln()).ln()
        }
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> f64 {
        // Open interval keeps the quantile finite.
        let u: f64 = rng.random::<f64>().max(f64::MIN_POSITIVE);
        self.quantile(u)
    }
}

//! Empirical distribution functions and Kolmogorov–Smirnov distances.

use crate::limits::GumbelLaw;

/// Right-continuous empirical CDF of a finite sample.
#[derive(Debug, Clone, PartialEq)]
pub struct Ecdf {
    sorted: Vec<f64>,
}

impl Ecdf {
    /// `None` for an empty sample or one containing NaN.
    pub fn new(mut sample: Vec<f64>) -> Option<Self> {
        if sample.is_empty() || sample.iter().any(|v| v.is_nan()) {
            return None;
        }
        sample.sort_by(f64::total_cmp);
        Some(Ecdf { sorted: sample })
    }

    pub fn len(&self) -> usize {
        self.sorted.len()
    }

    pub fn is_empty(&self) -> bool {
        self.sorted.is_empty()
    }

    pub fn values(&self) -> &[f64] {
        &self.sorted
    }

    /// Fraction of the sample `<= x`.
    pub fn eval(&self, x: f64) -> f64 {
        self.sorted.partition_point(|&v| v <= x) as f64 / self.len() as f64
    }

    /// Left-continuous inverse: the smallest sample value `v` with `eval(v) >= p`.
    pub fn quantile(&self, p: f64) -> f64 {
        let r = self.len();
        let idx = (p.clamp(0.0, 1.0) * r as f64).ceil() as usize;
        self.sorted[idx.clamp(1, r) - 1]
    }

    pub fn median(&self) -> f64 {
        self.quantile(0.5)
    }

    /// Fraction of the sample `> y`.
    pub fn exceedance(&self, y: f64) -> f64 {
        1.0 - self.eval(y)
    }
}

/// `sup_x |F_R(x) - G(x)|`, checked on both sides of every jump.
pub fn ks_one_sample(e: &Ecdf, law: &GumbelLaw) -> f64 {
    let r = e.len() as f64;
    e.sorted
        .iter()
        .enumerate()
        .map(|(i, &x)| {
            let g = law.cdf(x);
            ((i + 1) as f64 / r - g).max(g - i as f64 / r)
        })
        .fold(0.0, f64::max)
}

/// `sup_x |F(x) - G(x)|` over the merged support.
pub fn ks_two_sample(e1: &Ecdf, e2: &Ecdf) -> f64 {
    let (a, b) = (&e1.sorted, &e2.sorted);
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut d = 0.0f64;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        d = d.max((i as f64 / na - j as f64 / nb).abs());
    }
    d
}

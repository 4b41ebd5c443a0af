//! Fixtures shared by the criterion benches.

use delab_core::matrix::{SymMatrix, Vector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// A random symmetric positive definite `d x d` matrix `G Gᵀ + εI`.
pub fn random_spd(d: usize, seed: u64) -> SymMatrix {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut m = SymMatrix::scaled_identity(d, 1e-3);
    for _ in 0..d {
        let g: Vec<f64> = (0..d).map(|_| rng.random_range(-1.0..1.0)).collect();
        m.add_outer(&Vector::from_slice(&g), 1.0);
    }
    m
}

#[cfg(test)]
mod tests {
    use super::*;
    use delab_core::matrix::eigen;

    #[test]
    fn fixture_is_positive_definite() {
        for d in 1..=4 {
            assert!(eigen(&random_spd(d, 7)).lambda_min() >= 1e-3 - 1e-12);
        }
    }
}

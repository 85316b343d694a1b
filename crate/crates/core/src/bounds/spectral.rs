use nalgebra::{DMatrix, DVector};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

const MAX_ITERATIONS: usize = 100_000;
const RESIDUAL_TOL: f64 = 1e-12;

/// `‖H‖₂ = √λmax(HᵀH)` by power iteration on `HᵀH`.
///
/// Iterates until the eigen-residual `‖Bv − λv‖` drops below `1e-12·λ`.
/// If the iterate collapses into the null space, restarts from a seeded
/// random vector.
pub fn spectral_norm(h: &DMatrix<f64>) -> Result<f64> {
    if h.nrows() != h.ncols() {
        return Err(Error::invalid(format!(
            "spectral_norm expects a square matrix, got {}x{}",
            h.nrows(),
            h.ncols()
        )));
    }
    let n = h.nrows();
    if n == 0 || h.iter().all(|&v| v == 0.0) {
        return Ok(0.0);
    }
    let gram = h.transpose() * h;
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());

    for _ in 0..MAX_ITERATIONS {
        let w = &gram * &v;
        let norm = w.norm();
        if norm == 0.0 {
            v = DVector::from_fn(n, |_, _| rng.random::<f64>() - 0.5);
            v /= v.norm();
            continue;
        }
        let lambda = v.dot(&w);
        let residual = (&w - &v * lambda).norm();
        if residual <= RESIDUAL_TOL * lambda.abs() {
            return Ok(lambda.max(0.0).sqrt());
        }
        v = w / norm;
    }
    Err(Error::PowerIterationDiverged(MAX_ITERATIONS))
}

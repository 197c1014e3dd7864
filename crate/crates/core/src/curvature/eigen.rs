//! Dominant (largest algebraic) eigenvalue of a symmetric operator by power iteration.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::linalg::{dot, norm2};

#[derive(Debug, Clone)]
pub struct EigenEstimate {
    pub value: f64,
    pub vector: Vec<f64>,
    pub iterations: usize,
}

fn start_vector(dim: usize) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_e16e);
    let v: Vec<f64> = (0..dim).map(|_| rng.random_range(0.5..1.5)).collect();
    let n = norm2(&v);
    v.into_iter().map(|x| x / n).collect()
}

/// Runs `v ← A v / ‖A v‖` and stops when successive values of `measure`
/// differ by less than `tol`.
fn iterate<F>(apply: F, dim: usize, tol: f64, max_iters: usize, rayleigh: bool) -> Result<EigenEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    let mut v = start_vector(dim);
    let mut prev = f64::NAN;
    for it in 1..=max_iters {
        let w = apply(&v);
        let norm = norm2(&w);
        let estimate = if rayleigh { dot(&v, &w) } else { norm };
        if !estimate.is_finite() {
            return Err(Error::Numeric {
                layer: 0,
                detail: "non-finite value during power iteration".into(),
            });
        }
        if norm == 0.0 {
            return Ok(EigenEstimate {
                value: 0.0,
                vector: v,
                iterations: it,
            });
        }
        v = w.into_iter().map(|x| x / norm).collect();
        if (estimate - prev).abs() < tol {
            return Ok(EigenEstimate {
                value: estimate,
                vector: v,
                iterations: it,
            });
        }
        prev = estimate;
    }
    Err(Error::NonConvergence {
        iterations: max_iters,
        last_estimate: prev,
        last_iterate: v,
    })
}

/// Largest eigenvalue of the symmetric operator `hvp`.
///
/// A first pass estimates the spectral radius ρ. If the dominant direction has
/// Rayleigh quotient +ρ that is the answer; otherwise the operator is shifted
/// to `H + ρI` (all eigenvalues ≥ 0), iterated again with Rayleigh-quotient
/// convergence, and the shift is removed from the result.
pub fn max_eigenvalue<F>(hvp: F, dim: usize, tol: f64, max_iters: usize) -> Result<EigenEstimate>
where
    F: Fn(&[f64]) -> Vec<f64>,
{
    if dim == 0 {
        return Err(Error::contract("max_eigenvalue on a zero-dimensional operator"));
    }
    if !(tol > 0.0) {
        return Err(Error::contract("power iteration tolerance must be positive"));
    }
    let radius = iterate(&hvp, dim, tol, max_iters, false)?;
    if radius.value == 0.0 {
        return Ok(radius);
    }
    let hv = hvp(&radius.vector);
    let rq = dot(&radius.vector, &hv);
    if (rq - radius.value).abs() < tol.sqrt().max(tol) * radius.value.max(1.0) {
        // Dominant eigenvalue is positive; polish with Rayleigh convergence.
        let polished = iterate(&hvp, dim, tol, max_iters, true)?;
        return Ok(EigenEstimate {
            iterations: radius.iterations + polished.iterations,
            ..polished
        });
    }
    let shift = radius.value;
    let shifted = iterate(
        |v: &[f64]| hvp(v).into_iter().zip(v).map(|(h, x)| h + shift * x).collect(),
        dim,
        tol,
        max_iters,
        true,
    )?;
    Ok(EigenEstimate {
        value: shifted.value - shift,
        vector: shifted.vector,
        iterations: radius.iterations + shifted.iterations,
    })
}

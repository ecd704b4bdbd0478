//! Rényi divergence between zero-noise-mean Gaussian AR(1) path laws.
//!
//! Both path densities are exp of a quadratic form with a tridiagonal
//! precision, so ∫ p_θ^α p_θ0^{1−α} is a Gaussian integral against the
//! mixed precision A = αA_θ + (1−α)A_θ0, evaluated by an O(n) LDLᵀ sweep.

use crate::error::{Error, Result};
use crate::linalg::TridiagLdl;
use crate::prelude::*;

/// log ∫ p_θ^α p_θ0^{1−α} over x_1..x_n given x_0 ~ N(mean, var) shared.
pub(crate) fn log_affinity_shared(theta: f64, theta0: f64, n: usize, alpha: f64, mean: f64, var: f64) -> Result<f64> {
    let beta = 1.0 - alpha;
    let gamma = alpha * theta * theta + beta * theta0 * theta0;
    let mixed = alpha * theta + beta * theta0;
    let mut diag = vec![1.0 + gamma; n];
    diag[n - 1] = 1.0;
    let off = vec![-mixed; n - 1];
    let ldl = TridiagLdl::new(&diag, &off).map_err(indefinite)?;
    let mut e1 = vec![0.0; n];
    e1[0] = 1.0;
    let inv11 = ldl.solve(&e1)[0];
    // given x0 the log-affinity is −½ log|A| + ½ κ x0²
    let kappa = mixed * mixed * inv11 - gamma;
    let one_minus = 1.0 - kappa * var;
    if !(one_minus > 0.0) {
        return Err(Error::numerical("initial-law integral diverges for this pair"));
    }
    Ok(-0.5 * ldl.log_det() - 0.5 * one_minus.ln() + 0.5 * kappa * mean * mean / one_minus)
}

/// Same, with each law started from its own invariant N(0, 1/(1−θ²)).
pub(crate) fn log_affinity_invariant(theta: f64, theta0: f64, n: usize, alpha: f64) -> Result<f64> {
    let beta = 1.0 - alpha;
    let gamma = alpha * theta * theta + beta * theta0 * theta0;
    let mixed = alpha * theta + beta * theta0;
    let mut diag = vec![1.0 + gamma; n + 1];
    diag[0] = 1.0;
    diag[n] = 1.0;
    let off = vec![-mixed; n];
    let ldl = TridiagLdl::new(&diag, &off).map_err(indefinite)?;
    let norm = 0.5 * (alpha * (1.0 - theta * theta).ln() + beta * (1.0 - theta0 * theta0).ln());
    Ok(norm - 0.5 * ldl.log_det())
}

fn indefinite(_: Error) -> Error {
    Error::numerical("mixed path precision is not positive definite; α is outside the valid range for this pair")
}

//! Convergence envelopes, used as diagnostic overlays on traces.

use super::SolverError;

/// `(1 − (2λ − λ²)/κ²)^i · err₀`, the expected squared-error envelope of
/// SKM with scaled condition number `κ`.
pub fn skm_bound(kappa: f64, lambda: f64, iters: usize, initial_err_sq: f64) -> f64 {
    let factor = (1.0 - (2.0 * lambda - lambda * lambda) / (kappa * kappa)).max(0.0);
    factor.powi(iters as i32) * initial_err_sq
}

/// `(1 − c σ_min²(B̂) ln k′ / ‖B̂‖_F²)^K · err₀` for the Gaussian-sketch
/// Block SKM. `c` is an unspecified absolute constant; callers pick it.
pub fn block_rate_bound(
    sigma_min_sq: f64,
    frob_sq: f64,
    k_prime: usize,
    c: f64,
    iters: usize,
    initial_err_sq: f64,
) -> Result<f64, SolverError> {
    if k_prime < 2 {
        return Err(SolverError::InvalidRate(format!("k' = {k_prime} must be at least 2")));
    }
    let factor = 1.0 - c * sigma_min_sq * (k_prime as f64).ln() / frob_sq;
    if !(0.0..=1.0).contains(&factor) {
        return Err(SolverError::InvalidRate(format!("rate factor {factor} outside [0, 1]")));
    }
    Ok(factor.powi(iters as i32) * initial_err_sq)
}

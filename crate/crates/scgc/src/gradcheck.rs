//! Central-difference gradient estimation, used to verify every analytic
//! gradient in the crate.

use crate::error::{Result, ScgcError};

/// Central-difference gradient of `f` at `params`: per coordinate,
/// (f(p + h e_k) - f(p - h e_k)) / (2h).
pub fn finite_difference_gradient<F>(f: &mut F, params: &[f64], h: f64) -> Result<Vec<f64>>
where
    F: FnMut(&[f64]) -> f64,
{
    if h <= 0.0 {
        return Err(ScgcError::InvalidInput(format!(
            "step h must be positive, got {h}"
        )));
    }
    let mut scratch = params.to_vec();
    let mut grad = Vec::with_capacity(params.len());
    for k in 0..params.len() {
        let orig = scratch[k];
        scratch[k] = orig + h;
        let fp = f(&scratch);
        scratch[k] = orig - h;
        let fm = f(&scratch);
        scratch[k] = orig;
        if !fp.is_finite() || !fm.is_finite() {
            return Err(ScgcError::NonFinite(format!(
                "finite_difference_gradient: f evaluated non-finite at coordinate {k}"
            )));
        }
        grad.push((fp - fm) / (2.0 * h));
    }
    Ok(grad)
}

/// Relative error between two gradient entries, floored so that pure
/// round-off noise around zero does not blow up the ratio.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (a.abs() + b.abs()).max(1e-6)
}

/// Largest relative error over two gradient vectors.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

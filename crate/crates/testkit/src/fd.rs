//! Central finite-difference gradients.

/// Numeric gradient of `f` at `at` via central differences with the given
/// step. `f` is called 2·len times on perturbed copies.
pub fn central_diff_gradient(
    f: &mut dyn FnMut(&[f64]) -> f64,
    at: &[f64],
    step: f64,
) -> Vec<f64> {
    let mut point = at.to_vec();
    let mut grad = vec![0.0; at.len()];
    for i in 0..at.len() {
        let orig = point[i];
        point[i] = orig + step;
        let plus = f(&point);
        point[i] = orig - step;
        let minus = f(&point);
        point[i] = orig;
        grad[i] = (plus - minus) / (2.0 * step);
    }
    grad
}

/// Largest elementwise relative error between two gradients. The denominator
/// is floored at 1e-6 so coordinates whose true gradient is essentially zero
/// compare absolutely instead of dividing noise by noise.
pub fn max_rel_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-6))
        .fold(0.0, f64::max)
}

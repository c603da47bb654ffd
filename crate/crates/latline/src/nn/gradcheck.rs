//! Central-difference gradient checking.
//!
//! These helpers only ever call the supplied loss closure, so they stay
//! independent of whatever reverse-mode path produced the analytic gradient
//! being checked.

/// Central-difference gradient of `f` at `params` with step `eps`.
pub fn central_diff(f: &impl Fn(&[f64]) -> f64, params: &[f64], eps: f64) -> Vec<f64> {
    let mut probe = params.to_vec();
    let mut out = vec![0.0; params.len()];
    for i in 0..params.len() {
        let orig = probe[i];
        probe[i] = orig + eps;
        let plus = f(&probe);
        probe[i] = orig - eps;
        let minus = f(&probe);
        probe[i] = orig;
        out[i] = (plus - minus) / (2.0 * eps);
    }
    out
}

/// Largest component-wise relative error between two gradients.
///
/// The denominator is floored at 1e-3 so near-zero components are compared
/// absolutely instead of amplifying finite-difference noise.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| (a - n).abs() / a.abs().max(n.abs()).max(1e-3))
        .fold(0.0, f64::max)
}

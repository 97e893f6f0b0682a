//! Central finite differences for validating analytic gradients.

/// Magnitude below which gradient entries are compared absolutely rather
/// than relatively.
pub const RELATIVE_FLOOR: f64 = 1e-6;

/// Numerical gradient of `f` at `theta` by central differences with the given
/// step. `theta` is perturbed in place and restored before returning.
pub fn central_difference(theta: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = theta[i];
        theta[i] = orig + step;
        let plus = f(theta);
        theta[i] = orig - step;
        let minus = f(theta);
        theta[i] = orig;
        grad.push((plus - minus) / (2.0 * step));
    }
    grad
}

/// Fourth-order (five-point) central differences; exact up to round-off for
/// polynomials of degree four or less.
pub fn five_point_difference(theta: &mut [f64], step: f64, mut f: impl FnMut(&[f64]) -> f64) -> Vec<f64> {
    let mut grad = Vec::with_capacity(theta.len());
    for i in 0..theta.len() {
        let orig = theta[i];
        let mut at = |offset: f64| {
            theta[i] = orig + offset;
            f(theta)
        };
        let (p2, p1, m1, m2) = (at(2.0 * step), at(step), at(-step), at(-2.0 * step));
        theta[i] = orig;
        grad.push((-p2 + 8.0 * p1 - 8.0 * m1 + m2) / (12.0 * step));
    }
    grad
}

/// `|a - b| / max(|a|, |b|, RELATIVE_FLOOR)`.
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(RELATIVE_FLOOR)
}

/// Largest [`relative_error`] over paired entries.
pub fn max_relative_error(analytic: &[f64], numeric: &[f64]) -> f64 {
    assert_eq!(analytic.len(), numeric.len());
    analytic
        .iter()
        .zip(numeric)
        .map(|(&a, &n)| relative_error(a, n))
        .fold(0.0, f64::max)
}

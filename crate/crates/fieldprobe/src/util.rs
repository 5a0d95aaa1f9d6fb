//! Small numeric helpers shared by the library and its tests.

use num_complex::Complex64 as C64;

/// Least-squares slope of log(y) against log(x).
pub fn loglog_slope(xs: &[f64], ys: &[f64]) -> f64 {
    assert_eq!(xs.len(), ys.len());
    let pts: Vec<(f64, f64)> = xs
        .iter()
        .zip(ys)
        .filter(|(x, y)| **x > 0.0 && **y > 0.0)
        .map(|(x, y)| (x.ln(), y.ln()))
        .collect();
    let n = pts.len() as f64;
    let mx = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let num: f64 = pts.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let den: f64 = pts.iter().map(|p| (p.0 - mx) * (p.0 - mx)).sum();
    num / den
}

/// |a - b| relative to the larger magnitude, with an absolute floor so
/// that near-zero pairs compare as equal.
pub fn rel_diff(a: C64, b: C64) -> f64 {
    let scale = a.norm().max(b.norm());
    if scale < 1e-300 {
        return 0.0;
    }
    (a - b).norm() / scale
}

/// Max-norm relative difference of two complex slices.
pub fn rel_diff_slice(a: &[C64], b: &[C64]) -> f64 {
    let scale = a
        .iter()
        .chain(b)
        .map(|v| v.norm())
        .fold(0.0f64, f64::max);
    if scale < 1e-300 {
        return 0.0;
    }
    a.iter()
        .zip(b)
        .map(|(u, v)| (u - v).norm())
        .fold(0.0f64, f64::max)
        / scale
}

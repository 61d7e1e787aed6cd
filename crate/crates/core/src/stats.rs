//! Small fitting helpers for convergence traces.

use crate::trace::TraceRecord;

/// Least-squares slope of `y` against `x`.
pub fn slope(points: &[(f64, f64)]) -> f64 {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    sxy / sxx
}

/// Log-log slope of `F(x_k) − F*` against `k` over rows `first..=last`,
/// skipping rows whose residual is not positive.
pub fn residual_slope(records: &[TraceRecord], f_star: f64, first: usize, last: usize) -> Option<f64> {
    let points: Vec<(f64, f64)> = records
        .iter()
        .filter(|r| r.k >= first.max(1) && r.k <= last)
        .filter_map(|r| {
            let gap = r.objective - f_star;
            (gap > 0.0).then(|| ((r.k as f64).ln(), gap.ln()))
        })
        .collect();
    (points.len() >= 2).then(|| slope(&points))
}

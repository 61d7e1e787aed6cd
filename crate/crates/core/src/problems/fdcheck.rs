use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use super::rng::DataRng;
use super::{Problem, SmoothOracle};

/// Worst-case agreement between an oracle and central differences.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct FdReport {
    /// `max ‖∇f_fd − ∇f‖_∞ / max(1, ‖∇f‖_∞)` over the sample.
    pub max_grad_error: f64,
    /// `max ‖∇²f_fd − ∇²f‖_max / max(1, ‖∇²f‖_max)` over the sample.
    pub max_hess_error: f64,
    pub points: usize,
    /// Number of sample points moved away from a kink.
    pub resampled: usize,
}

const MAX_RESAMPLES: usize = 100;

fn step_size(x: &DVector<f64>) -> f64 {
    1e-5 * (1.0 + x.norm())
}

fn max_abs(values: impl Iterator<Item = f64>) -> f64 {
    values.fold(0.0, |acc, v| acc.max(v.abs()))
}

fn errors_at(oracle: &dyn SmoothOracle, x: &DVector<f64>) -> (f64, f64) {
    let n = x.len();
    let h = step_size(x);
    let grad = oracle.gradient(x);
    let hess = oracle.hessian(x);
    let mut fd_grad = DVector::zeros(n);
    let mut fd_hess = DMatrix::zeros(n, n);
    for i in 0..n {
        let mut plus = x.clone();
        let mut minus = x.clone();
        plus[i] += h;
        minus[i] -= h;
        fd_grad[i] = (oracle.value(&plus) - oracle.value(&minus)) / (2.0 * h);
        let column = (oracle.gradient(&plus) - oracle.gradient(&minus)) / (2.0 * h);
        fd_hess.set_column(i, &column);
    }
    let grad_err = max_abs((&fd_grad - &grad).iter().copied()) / max_abs(grad.iter().copied()).max(1.0);
    let hess_err = max_abs((&fd_hess - &hess).iter().copied()) / max_abs(hess.iter().copied()).max(1.0);
    (grad_err, hess_err)
}

fn near_kink(oracle: &dyn SmoothOracle, x: &DVector<f64>) -> bool {
    oracle
        .kink_distance(x)
        .is_some_and(|d| d < (2.0 * step_size(x)).max(1e-7))
}

/// Checks `problem`'s oracle at `points` random points `x₀ + u`, with `u`
/// uniform on `[−1, 1]ⁿ`.
pub fn fd_check(problem: &Problem, points: usize, seed: u64) -> FdReport {
    let mut rng = DataRng::new(seed);
    let n = problem.dim();
    let sample: Vec<DVector<f64>> = (0..points)
        .map(|_| &*problem.x0 + DVector::from_fn(n, |_, _| rng.symmetric()))
        .collect();
    fd_check_at(problem.oracle.as_ref(), &sample, rng.next_u64())
}

/// Checks the oracle at the given points. A point whose stencil would cross a
/// kink of the oracle is moved by a random perturbation until it is clear.
pub fn fd_check_at(oracle: &dyn SmoothOracle, points: &[DVector<f64>], seed: u64) -> FdReport {
    let mut rng = DataRng::new(seed);
    let mut report = FdReport {
        max_grad_error: 0.0,
        max_hess_error: 0.0,
        points: points.len(),
        resampled: 0,
    };
    for point in points {
        let mut x = point.clone();
        let mut tries = 0;
        while near_kink(oracle, &x) && tries < MAX_RESAMPLES {
            let radius = 1e-2 * (1.0 + point.norm());
            x = point + DVector::from_fn(x.len(), |_, _| radius * rng.symmetric());
            tries += 1;
        }
        if tries > 0 {
            report.resampled += 1;
        }
        let (g, h) = errors_at(oracle, &x);
        report.max_grad_error = report.max_grad_error.max(g);
        report.max_hess_error = report.max_hess_error.max(h);
    }
    report
}

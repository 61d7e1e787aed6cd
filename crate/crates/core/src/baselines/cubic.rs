use nalgebra::{Cholesky, DMatrix, Dyn};

use super::{BaselineConfig, Recorder};
use crate::error::{check_dim, Error, Result};
use crate::metric::{Dual, Metric, Primal};
use crate::problems::Problem;
use crate::trace::Trace;

/// Minimizer of the cubic model `⟨g, h⟩ + ½⟨Hh, h⟩ + (M/6)‖h‖³`.
#[derive(Clone, Debug)]
pub struct CubicStep {
    pub h: Primal,
    /// `λ = M‖h‖/2`, the shift with `(H + λB)h = −g`.
    pub lambda: f64,
    /// `‖h‖`.
    pub r: f64,
}

const BRACKET_EXPANSIONS: usize = 200;
const ROOT_ITERATIONS: usize = 200;

struct Shifted {
    factor: Cholesky<f64, Dyn>,
    h: Primal,
    r: f64,
}

fn shifted_solve(grad: &Dual, hess: &DMatrix<f64>, lambda: f64, metric: &Metric) -> Result<Shifted> {
    let a = metric.shifted(hess, lambda)?;
    let factor = Cholesky::new(a).ok_or_else(|| {
        Error::NumericalBreakdown(format!("H + λB is not positive definite at λ = {lambda:.3e}"))
    })?;
    let h = Primal(-factor.solve(&grad.0));
    let r = metric.primal_norm(&h)?;
    Ok(Shifted { factor, h, r })
}

/// Solves the cubic subproblem through the scalar equation
/// `λ = M‖(H + λB)⁻¹g‖/2`, which is increasing in `λ`.
///
/// The bracket `(0, λ_hi]` starts from `λ_hi = M‖g‖_*^{1/2}` and grows by
/// a factor of four until it contains the root; Newton steps are used when
/// they stay inside the bracket and bisection otherwise.
pub fn cubic_subproblem(grad: &Dual, hess: &DMatrix<f64>, m: f64, metric: &Metric) -> Result<CubicStep> {
    check_dim(metric.dim(), grad.len())?;
    if !(m > 0.0 && m.is_finite()) {
        return Err(Error::InvalidConfig(format!("cubic constant must be positive, got {m}")));
    }
    let g = metric.dual_norm(grad)?;
    if g == 0.0 {
        return Ok(CubicStep {
            h: Primal::zeros(grad.len()),
            lambda: 0.0,
            r: 0.0,
        });
    }
    let phi = |lambda: f64, s: &Shifted| lambda - 0.5 * m * s.r;

    let mut hi = m * g.sqrt();
    let mut at_hi = shifted_solve(grad, hess, hi, metric)?;
    let mut expansions = 0;
    while phi(hi, &at_hi) < 0.0 {
        expansions += 1;
        if expansions > BRACKET_EXPANSIONS {
            return Err(Error::NumericalBreakdown("cubic step: root not bracketed".into()));
        }
        hi *= 4.0;
        at_hi = shifted_solve(grad, hess, hi, metric)?;
    }

    let mut lo = 0.0;
    let mut lambda = hi;
    let mut cur = at_hi;
    for _ in 0..ROOT_ITERATIONS {
        let value = phi(lambda, &cur);
        if value.abs() <= 1e-13 * lambda || hi - lo <= 1e-15 * hi {
            break;
        }
        if value > 0.0 {
            hi = lambda;
        } else {
            lo = lambda;
        }
        // dr/dλ = −⟨Bh, (H + λB)⁻¹Bh⟩ / r.
        let bh = metric.apply(&cur.h)?;
        let w = cur.factor.solve(&bh.0);
        let slope = 1.0 + 0.5 * m * bh.dot(&w) / cur.r;
        let newton = lambda - value / slope;
        lambda = if newton > lo && newton < hi {
            newton
        } else {
            0.5 * (lo + hi)
        };
        cur = shifted_solve(grad, hess, lambda, metric)?;
    }
    Ok(CubicStep {
        h: cur.h,
        lambda,
        r: cur.r,
    })
}

/// Adaptive cubic regularization of Newton's method.
///
/// A trial with constant `M` is accepted when `f(x + h)` does not exceed the
/// cubic model value at `h`; then `M` is multiplied by `cfg.decrease`,
/// otherwise by `cfg.increase`. Each trial costs one oracle call. The `H`
/// column of the trace holds `M` at the start of the iteration and `lambda`
/// holds `M‖h‖/2` of the accepted step.
pub fn run_cubic_newton(problem: &Problem, x0: &Primal, cfg: &BaselineConfig) -> Result<Trace> {
    cfg.validate()?;
    check_dim(problem.dim(), x0.len())?;
    if problem.composite.is_some() {
        return Err(Error::InvalidConfig("cubic Newton handles smooth problems only".into()));
    }
    let metric = &problem.metric;
    let oracle = problem.oracle.as_ref();
    let mut rec = Recorder::new("cubic_newton", x0);
    let mut x = x0.clone();
    let mut grad = problem.gradient(&x);
    let mut hess = oracle.hessian(&x);
    let mut f = oracle.value(&x);
    let mut m = cfg.initial_constant;

    loop {
        let g = metric.dual_norm(&grad).unwrap_or(f64::NAN);
        let row = match rec.open(cfg, m, f, f, g) {
            Ok(Some(row)) => row,
            Ok(None) => return Ok(rec.finish(x.0)),
            Err(e) => return Err(rec.fail(x.0, e)),
        };
        let mut accepted = None;
        for j in 0..=cfg.max_doublings {
            let step = match cubic_subproblem(&grad, &hess, m, metric) {
                Ok(s) => s,
                Err(e) => {
                    rec.abandon(row);
                    return Err(rec.fail(x.0, e));
                }
            };
            let trial = Primal(&*x + &*step.h);
            let f_trial = oracle.value(&trial);
            let model = f + grad.pair(&step.h) + 0.5 * step.h.dot(&(&hess * &*step.h)) + m / 6.0 * step.r.powi(3);
            if f_trial <= model + 16.0 * f64::EPSILON * (1.0 + f.abs()) {
                m *= cfg.decrease;
                accepted = Some((j, step, trial, f_trial));
                break;
            }
            m *= cfg.increase;
        }
        let Some((j, step, trial, f_trial)) = accepted else {
            rec.abandon(row);
            return Err(rec.fail(
                x.0,
                Error::SearchStall {
                    trials: cfg.max_doublings + 1,
                },
            ));
        };
        rec.commit(row, j, step.lambda, step.r);
        x = trial;
        f = f_trial;
        grad = problem.gradient(&x);
        hess = oracle.hessian(&x);
    }
}

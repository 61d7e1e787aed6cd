//! One regularized Newton step `T_λ(x)`.
//!
//! The step minimizes the second-order model regularized by `(λ/2)‖y − x‖²`:
//!
//! ```text
//! T_λ(x) = argmin_y ⟨∇f(x), y − x⟩ + ½⟨∇²f(x)(y − x), y − x⟩ + (λ/2)‖y − x‖² + ψ(y)
//! ```
//!
//! Without a composite term this is a single shifted linear solve. With one,
//! an accelerated proximal gradient method runs on the model, with an exact
//! active-face solve attempted along the way. In both cases the subgradient
//! `ψ'(T)` is recovered from the stationarity condition of the model, so the
//! composite gradient `F'(T) = ∇f(T) + ψ'(T)` costs one gradient evaluation.

use nalgebra::{DMatrix, DVector};

use crate::composite::CompositePart;
use crate::error::{check_dim, Error, Result};
use crate::metric::{Dual, Metric, Primal};
use crate::problems::{Problem, SmoothOracle};

/// Oracle information at the current point `x`, plus the subgradient
/// `s ∈ ∂ψ(x)` carried over from the previous step.
#[derive(Clone, Debug)]
pub struct LocalModel {
    pub x: Primal,
    pub grad: Dual,
    pub hess: DMatrix<f64>,
    pub subgrad: Dual,
}

impl LocalModel {
    pub fn new(x: Primal, grad: Dual, hess: DMatrix<f64>, subgrad: Dual) -> Self {
        Self { x, grad, hess, subgrad }
    }

    /// Evaluates the gradient and Hessian of `problem` at `x`.
    pub fn at(problem: &Problem, x: Primal, subgrad: Dual) -> Self {
        let grad = problem.gradient(&x);
        let hess = problem.oracle.hessian(&x);
        Self { x, grad, hess, subgrad }
    }

    /// `‖∇f(x) + s‖_*`.
    pub fn composite_grad_norm(&self, metric: &Metric) -> Result<f64> {
        metric.dual_norm(&Dual(&*self.grad + &*self.subgrad))
    }
}

#[derive(Clone, Debug)]
pub struct StepResult {
    /// The new point `T`.
    pub point: Primal,
    /// `∇f(T)`.
    pub grad: Dual,
    /// Implicit subgradient `ψ'(T)`.
    pub psi_sub: Dual,
    /// `F'(T) = ∇f(T) + ψ'(T)`.
    pub composite_grad: Dual,
    /// `r = ‖T − x‖`.
    pub step_norm: f64,
    pub inner_iterations: usize,
    /// Optimality residual of the inner solve (zero for direct solves).
    pub inner_residual: f64,
}

impl StepResult {
    fn stationary(model: &LocalModel) -> Self {
        Self {
            point: model.x.clone(),
            grad: model.grad.clone(),
            psi_sub: model.subgrad.clone(),
            composite_grad: Dual(&*model.grad + &*model.subgrad),
            step_norm: 0.0,
            inner_iterations: 0,
            inner_residual: 0.0,
        }
    }
}

/// Settings for the inner solver of composite steps.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InnerOptions {
    /// Residual target; `None` selects `min(1e-8, 1e-3·‖∇f(x) + s‖_*)`.
    pub tol: Option<f64>,
    pub max_iterations: usize,
    /// Power-iteration steps for the initial Lipschitz estimate.
    pub power_iterations: usize,
    /// Try the exact active-face solve every this many iterations.
    pub polish_every: usize,
}

impl Default for InnerOptions {
    fn default() -> Self {
        Self {
            tol: None,
            max_iterations: 20_000,
            power_iterations: 20,
            polish_every: 5,
        }
    }
}

impl InnerOptions {
    pub fn tolerance(&self, g: f64) -> f64 {
        self.tol.unwrap_or_else(|| (1e-3 * g).min(1e-8))
    }
}

/// `ψ'(T) = −∇f(x) − ∇²f(x)(T − x) − λB(T − x)`.
pub fn implicit_subgradient(
    x: &Primal,
    t: &Primal,
    lambda: f64,
    grad: &Dual,
    hess: &DMatrix<f64>,
    metric: &Metric,
) -> Result<Dual> {
    check_dim(x.len(), t.len())?;
    check_dim(x.len(), grad.len())?;
    let h = Primal(&**t - &**x);
    let bh = metric.apply(&h)?;
    Ok(Dual(-(&**grad) - hess * &*h - &*bh * lambda))
}

/// The adaptive-search acceptance test `⟨F'(T), x − T⟩ ≥ ‖F'(T)‖²_* / (4λ)`.
///
/// Both sides are compared with an absolute slack of
/// `1e-15·(1 + ‖F'(T)‖²_*)` so roundoff cannot flip the outcome.
pub fn acceptance_check(composite_grad: &Dual, x: &Primal, t: &Primal, lambda: f64, metric: &Metric) -> Result<bool> {
    let g2 = metric.dual_norm(composite_grad)?.powi(2);
    let lhs = composite_grad.pair(&Primal(&**x - &**t));
    let rhs = g2 / (4.0 * lambda);
    Ok(lhs >= rhs - 1e-15 * (1.0 + g2))
}

/// Unconstrained step `T = x − (∇²f(x) + λB)⁻¹∇f(x)` followed by one gradient
/// evaluation at `T`.
pub fn step_unconstrained(
    oracle: &dyn SmoothOracle,
    model: &LocalModel,
    lambda: f64,
    metric: &Metric,
) -> Result<StepResult> {
    if model.grad.iter().all(|&v| v == 0.0) {
        return Ok(StepResult::stationary(model));
    }
    let h = metric.solve_shifted(&model.hess, lambda, &Dual(-&*model.grad))?;
    let point = Primal(&*model.x + &*h);
    let step_norm = metric.primal_norm(&h)?;
    let grad = Dual(oracle.gradient(&point));
    Ok(StepResult {
        psi_sub: Dual::zeros(point.len()),
        composite_grad: grad.clone(),
        point,
        grad,
        step_norm,
        inner_iterations: 0,
        inner_residual: 0.0,
    })
}

/// Composite step, solved approximately to the residual given by `opts`.
pub fn step_composite(
    oracle: &dyn SmoothOracle,
    model: &LocalModel,
    psi: &dyn CompositePart,
    lambda: f64,
    metric: &Metric,
    opts: &InnerOptions,
) -> Result<StepResult> {
    if !metric.is_identity() {
        return Err(Error::UnsupportedMetric(
            "composite steps use a Euclidean prox and need the identity metric".into(),
        ));
    }
    if !(lambda > 0.0) {
        return Err(Error::NumericalBreakdown(format!("regularization must be positive, got {lambda}")));
    }
    let g = model.composite_grad_norm(metric)?;
    if g == 0.0 {
        return Ok(StepResult::stationary(model));
    }
    let a = metric.shifted(&model.hess, lambda)?;
    // Model in absolute coordinates: ½yᵀAy + cᵀy + ψ(y), c = ∇f(x) − Ax.
    let c = &*model.grad - &a * &*model.x;
    let inner = solve_prox_quadratic(&a, &c, lambda, psi, &model.x, opts.tolerance(g), opts)?;

    let point = Primal(inner.solution);
    let step_norm = metric.primal_norm(&Primal(&*point - &*model.x))?;
    let psi_sub = implicit_subgradient(&model.x, &point, lambda, &model.grad, &model.hess, metric)?;
    let grad = Dual(oracle.gradient(&point));
    Ok(StepResult {
        composite_grad: Dual(&*grad + &*psi_sub),
        point,
        grad,
        psi_sub,
        step_norm,
        inner_iterations: inner.iterations,
        inner_residual: inner.residual,
    })
}

/// Dispatches to the unconstrained or composite step depending on `problem`.
pub fn regularized_step(problem: &Problem, model: &LocalModel, lambda: f64, opts: &InnerOptions) -> Result<StepResult> {
    match &problem.composite {
        None => step_unconstrained(problem.oracle.as_ref(), model, lambda, &problem.metric),
        Some(psi) => step_composite(problem.oracle.as_ref(), model, psi.as_ref(), lambda, &problem.metric, opts),
    }
}

struct InnerSolution {
    solution: DVector<f64>,
    residual: f64,
    iterations: usize,
}

fn largest_eigenvalue(a: &DMatrix<f64>, iterations: usize) -> f64 {
    let n = a.nrows();
    let mut v = DVector::from_element(n, 1.0 / (n as f64).sqrt());
    let mut estimate = 0.0;
    for _ in 0..iterations {
        let av = a * &v;
        let norm = av.norm();
        if norm == 0.0 {
            return 0.0;
        }
        estimate = v.dot(&av);
        v = av / norm;
    }
    estimate
}

/// Minimizes `½yᵀAy + cᵀy + ψ(y)` where `A ⪰ μI`, starting from `start`.
///
/// Accelerated proximal gradient with strongly convex momentum, gradient
/// restarts and backtracking on the Lipschitz estimate. The residual of an
/// iterate `y⁺ = prox(z − ∇q(z)/L)` is the norm of the model subgradient
/// `∇q(y⁺) − ∇q(z) + L(z − y⁺) ∈ ∂m(y⁺)`.
fn solve_prox_quadratic(
    a: &DMatrix<f64>,
    c: &DVector<f64>,
    mu: f64,
    psi: &dyn CompositePart,
    start: &DVector<f64>,
    tol: f64,
    opts: &InnerOptions,
) -> Result<InnerSolution> {
    let mut lip = largest_eigenvalue(a, opts.power_iterations).max(mu);
    let mut y_prev = psi.prox(start, 1.0 / lip);
    let mut z = y_prev.clone();
    let mut best = (f64::INFINITY, y_prev.clone());

    for it in 1..=opts.max_iterations {
        let grad_z = a * &z + c;
        let (y, d) = loop {
            let y = psi.prox(&(&z - &grad_z / lip), 1.0 / lip);
            let d = &y - &z;
            let curvature = d.dot(&(a * &d));
            if curvature <= lip * d.norm_squared() * (1.0 + 1e-12) {
                break (y, d);
            }
            lip *= 2.0;
        };
        let grad_y = a * &y + c;
        let residual = (&grad_y - &grad_z - &d * lip).norm();
        if residual < best.0 {
            best = (residual, y.clone());
        }
        if residual <= tol {
            return Ok(InnerSolution {
                solution: y,
                residual,
                iterations: it,
            });
        }

        if opts.polish_every > 0 && it % opts.polish_every == 1 {
            if let Some(p) = psi.polish(a, c, &y) {
                let grad_p = a * &p + c;
                let res_p = psi.subgradient_distance(&(-grad_p), &p);
                if res_p <= tol {
                    return Ok(InnerSolution {
                        solution: p,
                        residual: res_p,
                        iterations: it,
                    });
                }
            }
        }

        let step = &y - &y_prev;
        if (&z - &y).dot(&step) > 0.0 {
            z = y.clone();
        } else {
            let (sl, sm) = (lip.sqrt(), mu.sqrt());
            let beta = (sl - sm) / (sl + sm);
            z = &y + step * beta;
        }
        y_prev = y;
    }

    Err(Error::InnerNonconvergence {
        iterations: opts.max_iterations,
        residual: best.0,
        best: best.1,
    })
}

//! Regularized Newton drivers.
//!
//! [`run_fixed`] uses the closed-form regularization
//! `λ_k = (6 M_q g_k^{q−2})^{1/(q−1)}` for a known smoothness constant.
//! [`run_super_universal`] needs no constants: it tries
//! `λ_k = 4^j H_k g_k^α` for `j = 0, 1, …` until the acceptance test passes
//! and then sets `H_{k+1} = 4^j H_k / 4`.
//!
//! Oracle calls are counted as one per trial step (the gradient at the trial
//! point). The Hessian at `x_k` is shared by all trials of an iteration and
//! the evaluation at `x₀` is free, so `N_k = Σ_{i<k} (1 + j_i)`.

use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::error::{check_dim, Error, Result};
use crate::metric::{Dual, Primal};
use crate::problems::Problem;
use crate::subproblem::{acceptance_check, regularized_step, InnerOptions, LocalModel, StepResult};
use crate::trace::{Status, Trace, TraceRecord};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SolverConfig {
    /// Gradient power `α` of the adaptive driver.
    pub alpha: f64,
    /// Starting regularization constant `H₀` of the adaptive driver.
    pub h0: f64,
    /// Run [`init_h0`] from `h0` before iterating.
    pub search_h0: bool,
    /// Smoothness degree `q` of the fixed driver.
    pub q: f64,
    /// Smoothness constant `M_q` of the fixed driver.
    pub mq: f64,
    pub max_iterations: usize,
    pub max_oracle_calls: usize,
    pub max_seconds: Option<f64>,
    /// Stop once `g_k ≤ tol_grad · max(1, g₀)`.
    pub tol_grad: f64,
    /// Residual target of composite inner solves; `None` uses
    /// `min(1e-8, 1e-3·g_k)`.
    pub inner_tol: Option<f64>,
    pub inner_max_iterations: usize,
    /// Largest `j` tried in one iteration before giving up.
    pub max_trials: usize,
    /// When false the adaptive driver always takes `j = 0` and keeps `H`
    /// fixed, which reproduces the fixed driver.
    pub adaptive: bool,
}

impl Default for SolverConfig {
    fn default() -> Self {
        Self {
            alpha: 1.0,
            h0: 1.0,
            search_h0: false,
            q: 3.0,
            mq: 1.0,
            max_iterations: 1000,
            max_oracle_calls: 100_000,
            max_seconds: None,
            tol_grad: 1e-9,
            inner_tol: None,
            inner_max_iterations: InnerOptions::default().max_iterations,
            max_trials: 60,
            adaptive: true,
        }
    }
}

impl SolverConfig {
    pub fn inner_options(&self) -> InnerOptions {
        InnerOptions {
            tol: self.inner_tol,
            max_iterations: self.inner_max_iterations,
            ..InnerOptions::default()
        }
    }

    fn validate_common(&self) -> Result<()> {
        if !(self.tol_grad >= 0.0) {
            return Err(Error::InvalidConfig(format!("tol_grad must be non-negative, got {}", self.tol_grad)));
        }
        if self.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("max_seconds must be positive".into()));
        }
        Ok(())
    }

    /// Checks the adaptive driver's parameters. `α` below 2/3 is outside the
    /// range covered by the theory but is accepted with a warning.
    pub fn validate_adaptive(&self) -> Result<()> {
        self.validate_common()?;
        if !(0.0..=1.0).contains(&self.alpha) {
            return Err(Error::InvalidConfig(format!("alpha must lie in [0, 1], got {}", self.alpha)));
        }
        if self.alpha < 2.0 / 3.0 {
            log::warn!("alpha = {} is below 2/3; convergence guarantees do not apply", self.alpha);
        }
        if !(self.h0 > 0.0 && self.h0.is_finite()) {
            return Err(Error::InvalidConfig(format!("h0 must be positive, got {}", self.h0)));
        }
        Ok(())
    }

    pub fn validate_fixed(&self) -> Result<()> {
        self.validate_common()?;
        if !(2.0..=4.0).contains(&self.q) {
            return Err(Error::InvalidConfig(format!("q must lie in [2, 4], got {}", self.q)));
        }
        if !(self.mq > 0.0 && self.mq.is_finite()) {
            return Err(Error::InvalidConfig(format!("mq must be positive, got {}", self.mq)));
        }
        Ok(())
    }
}

/// `λ = (6 M_q g^{q−2})^{1/(q−1)}`.
pub fn fixed_lambda(g: f64, q: f64, mq: f64) -> f64 {
    (6.0 * mq * g.powf(q - 2.0)).powf(1.0 / (q - 1.0))
}

/// Data handed to an observer after every accepted step.
#[derive(Debug)]
pub struct AcceptedStep<'a> {
    pub k: usize,
    pub lambda: f64,
    pub trials: usize,
    /// Model at `x_k`.
    pub model: &'a LocalModel,
    /// The step to `x_{k+1}`.
    pub step: &'a StepResult,
}

#[derive(Clone, Copy, Debug)]
enum Schedule {
    Fixed { q: f64, mq: f64 },
    Adaptive { alpha: f64, adaptive: bool },
}

/// Runs the fixed-constant driver from `x0`.
pub fn run_fixed(problem: &Problem, x0: &Primal, cfg: &SolverConfig) -> Result<Trace> {
    cfg.validate_fixed()?;
    let schedule = Schedule::Fixed { q: cfg.q, mq: cfg.mq };
    let h = (6.0 * cfg.mq).powf(1.0 / (cfg.q - 1.0));
    drive("fixed", problem, x0, cfg, schedule, h, 0, &mut |_| {})
}

/// Runs the Super-Universal driver from `x0`.
pub fn run_super_universal(problem: &Problem, x0: &Primal, cfg: &SolverConfig) -> Result<Trace> {
    run_super_universal_with(problem, x0, cfg, &mut |_| {})
}

/// Like [`run_super_universal`], calling `observer` after every accepted step.
pub fn run_super_universal_with(
    problem: &Problem,
    x0: &Primal,
    cfg: &SolverConfig,
    observer: &mut dyn FnMut(&AcceptedStep<'_>),
) -> Result<Trace> {
    cfg.validate_adaptive()?;
    let (h0, setup_calls) = if cfg.search_h0 {
        let init = init_h0(problem, x0, cfg.h0, cfg.alpha, &cfg.inner_options())?;
        (init.h0, init.oracle_calls)
    } else {
        (cfg.h0, 0)
    };
    let schedule = Schedule::Adaptive {
        alpha: cfg.alpha,
        adaptive: cfg.adaptive,
    };
    drive("super_universal", problem, x0, cfg, schedule, h0, setup_calls, observer)
}

#[allow(clippy::too_many_arguments)]
fn drive(
    name: &str,
    problem: &Problem,
    x0: &Primal,
    cfg: &SolverConfig,
    schedule: Schedule,
    h0: f64,
    setup_calls: usize,
    observer: &mut dyn FnMut(&AcceptedStep<'_>),
) -> Result<Trace> {
    check_dim(problem.dim(), x0.len())?;
    let mut trace = Trace::new(name, x0.0.clone());
    trace.setup_oracle_calls = setup_calls;
    let fail = |trace: Trace, err: Error| -> Error {
        let mut trace = trace;
        trace.status = Status::Error(err.to_string());
        Error::RunFailed {
            source: Box::new(err),
            trace: Box::new(trace),
        }
    };

    let s0 = match problem.initial_subgradient(x0) {
        Ok(s) => s,
        Err(e) => return Err(fail(trace, e)),
    };
    let inner = cfg.inner_options();
    let metric = &problem.metric;
    let start = Instant::now();
    let mut model = LocalModel::at(problem, x0.clone(), s0);
    let mut h = h0;
    let mut calls = 0usize;
    let mut k = 0usize;
    let g0 = match model.composite_grad_norm(metric) {
        Ok(g) => g,
        Err(e) => return Err(fail(trace, e)),
    };
    let target = cfg.tol_grad * g0.max(1.0);

    loop {
        let g = model.composite_grad_norm(metric).unwrap_or(f64::NAN);
        let f = problem.oracle.value(&model.x);
        let objective = f + problem.psi(&model.x);
        let mut row = TraceRecord {
            k,
            j: 0,
            lambda: 0.0,
            h,
            f,
            objective,
            grad_norm: g,
            step_norm: 0.0,
            oracle_calls: calls,
            time_s: start.elapsed().as_secs_f64(),
        };
        if !g.is_finite() || !objective.is_finite() {
            trace.records.push(row);
            trace.x = model.x.0.clone();
            return Err(fail(trace, Error::NumericalBreakdown(format!("non-finite iterate at k = {k}"))));
        }

        let status = if g <= target {
            Some(Status::Converged)
        } else if k >= cfg.max_iterations
            || calls >= cfg.max_oracle_calls
            || cfg.max_seconds.is_some_and(|s| row.time_s >= s)
        {
            Some(Status::BudgetExhausted)
        } else {
            None
        };
        if let Some(status) = status {
            trace.records.push(row);
            trace.x = model.x.0;
            trace.status = status;
            return Ok(trace);
        }

        let outcome = match schedule {
            Schedule::Fixed { q, mq } => {
                let lambda = fixed_lambda(g, q, mq);
                regularized_step(problem, &model, lambda, &inner).map(|s| (s, lambda, 0))
            }
            Schedule::Adaptive { alpha, adaptive } => {
                adaptive_search(problem, &model, h * g.powf(alpha), adaptive, cfg.max_trials, &inner)
            }
        };
        let (step, lambda, j) = match outcome {
            Ok(v) => v,
            Err(e) => {
                trace.records.push(row);
                trace.x = model.x.0.clone();
                return Err(fail(trace, e));
            }
        };

        row.j = j;
        row.lambda = lambda;
        row.step_norm = step.step_norm;
        trace.records.push(row);
        calls += 1 + j;
        if let Schedule::Adaptive { adaptive: true, .. } = schedule {
            h = h * 4f64.powi(j as i32) / 4.0;
        }
        observer(&AcceptedStep {
            k,
            lambda,
            trials: j + 1,
            model: &model,
            step: &step,
        });
        let hess = problem.oracle.hessian(&step.point);
        model = LocalModel::new(step.point, step.grad, hess, step.psi_sub);
        k += 1;
    }
}

/// Tries `λ = 4^j λ₀` for `j = 0, 1, …` and returns the first accepted step
/// with its `λ` and `j`. Without adaptation the first trial is taken as is.
fn adaptive_search(
    problem: &Problem,
    model: &LocalModel,
    lambda0: f64,
    adaptive: bool,
    max_trials: usize,
    inner: &InnerOptions,
) -> Result<(StepResult, f64, usize)> {
    for j in 0..=max_trials {
        let lambda = lambda0 * 4f64.powi(j as i32);
        let step = regularized_step(problem, model, lambda, inner)?;
        if !adaptive || acceptance_check(&step.composite_grad, &model.x, &step.point, lambda, &problem.metric)? {
            return Ok((step, lambda, j));
        }
    }
    Err(Error::SearchStall { trials: max_trials + 1 })
}

/// Outcome of [`init_h0`].
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct InitH0 {
    pub h0: f64,
    /// `x₀` is already stationary; nothing was searched.
    pub converged: bool,
    /// Trial steps evaluated.
    pub oracle_calls: usize,
}

const INIT_ATTEMPTS: usize = 100;

/// Finds a starting constant `H₀` whose first step at `λ = H₀ g₀^α` passes
/// the acceptance test.
///
/// `h_start` is returned when it passes. Otherwise it is doubled until the
/// test passes, giving up after 100 doublings.
pub fn init_h0(problem: &Problem, x0: &Primal, h_start: f64, alpha: f64, inner: &InnerOptions) -> Result<InitH0> {
    if !(h_start > 0.0 && h_start.is_finite()) {
        return Err(Error::InvalidConfig(format!("initial constant must be positive, got {h_start}")));
    }
    check_dim(problem.dim(), x0.len())?;
    let model = LocalModel::at(problem, x0.clone(), problem.initial_subgradient(x0)?);
    let g0 = model.composite_grad_norm(&problem.metric)?;
    if g0 == 0.0 {
        return Ok(InitH0 {
            h0: h_start,
            converged: true,
            oracle_calls: 0,
        });
    }
    let mut h = h_start;
    for attempt in 1..=INIT_ATTEMPTS {
        let lambda = h * g0.powf(alpha);
        let step = regularized_step(problem, &model, lambda, inner)?;
        if acceptance_check(&step.composite_grad, &model.x, &step.point, lambda, &problem.metric)? {
            return Ok(InitH0 {
                h0: h,
                converged: false,
                oracle_calls: attempt,
            });
        }
        h *= 2.0;
    }
    Err(Error::InitializationFailure {
        attempts: INIT_ATTEMPTS,
    })
}

/// `‖F'(x₀)‖_*` with the subgradient used by the drivers.
pub fn initial_grad_norm(problem: &Problem, x0: &Primal) -> Result<f64> {
    let s = problem.initial_subgradient(x0)?;
    problem.metric.dual_norm(&Dual(&*problem.gradient(x0) + &*s))
}

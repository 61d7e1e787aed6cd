//! Comparison methods: adaptive cubic Newton and adaptive first-order
//! gradient methods. All of them write the same trace format as the
//! regularized Newton drivers.

mod cubic;
mod first_order;

use std::time::Instant;

use nalgebra::DVector;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::trace::{Status, Trace, TraceRecord};

pub use cubic::{cubic_subproblem, run_cubic_newton, CubicStep};
pub use first_order::run_first_order;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Variant {
    CubicNewton,
    Gradient,
    FastGradient,
}

impl Variant {
    pub fn name(self) -> &'static str {
        match self {
            Variant::CubicNewton => "cubic_newton",
            Variant::Gradient => "gradient",
            Variant::FastGradient => "fast_gradient",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BaselineConfig {
    pub variant: Variant,
    /// Initial constant: `M₀` for cubic Newton, `L₀` for the gradient methods.
    pub initial_constant: f64,
    /// Factor applied to the constant after a rejected trial.
    pub increase: f64,
    /// Factor applied to the constant after an accepted step.
    pub decrease: f64,
    /// Rejected trials allowed in one iteration.
    pub max_doublings: usize,
    pub max_iterations: usize,
    pub max_oracle_calls: usize,
    pub max_seconds: Option<f64>,
    /// Stop once `g_k ≤ tol_grad · max(1, g₀)`.
    pub tol_grad: f64,
}

impl Default for BaselineConfig {
    fn default() -> Self {
        Self {
            variant: Variant::CubicNewton,
            initial_constant: 1.0,
            increase: 2.0,
            decrease: 0.5,
            max_doublings: 60,
            max_iterations: 1000,
            max_oracle_calls: 100_000,
            max_seconds: None,
            tol_grad: 1e-9,
        }
    }
}

impl BaselineConfig {
    pub fn new(variant: Variant) -> Self {
        Self {
            variant,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.initial_constant > 0.0 && self.initial_constant.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "initial constant must be positive, got {}",
                self.initial_constant
            )));
        }
        if !(self.increase > 1.0) || !(self.decrease > 0.0 && self.decrease < 1.0) {
            return Err(Error::InvalidConfig(
                "adaptation needs increase > 1 and 0 < decrease < 1".into(),
            ));
        }
        if !(self.tol_grad >= 0.0) {
            return Err(Error::InvalidConfig("tol_grad must be non-negative".into()));
        }
        if self.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return Err(Error::InvalidConfig("max_seconds must be positive".into()));
        }
        Ok(())
    }
}

/// Row bookkeeping and stopping rules shared by the baselines.
struct Recorder {
    trace: Trace,
    start: Instant,
    calls: usize,
    target: Option<f64>,
}

impl Recorder {
    fn new(solver: &str, x0: &DVector<f64>) -> Self {
        Self {
            trace: Trace::new(solver, x0.clone()),
            start: Instant::now(),
            calls: 0,
            target: None,
        }
    }

    /// Opens row `k` for the current iterate. Returns `None` after recording
    /// a final row when the iterate is stationary enough or a budget is
    /// spent.
    fn open(&mut self, cfg: &BaselineConfig, h: f64, f: f64, objective: f64, g: f64) -> Result<Option<TraceRecord>> {
        let k = self.trace.records.len();
        let target = *self.target.get_or_insert(cfg.tol_grad * g.max(1.0));
        let row = TraceRecord {
            k,
            j: 0,
            lambda: 0.0,
            h,
            f,
            objective,
            grad_norm: g,
            step_norm: 0.0,
            oracle_calls: self.calls,
            time_s: self.start.elapsed().as_secs_f64(),
        };
        if !g.is_finite() || !objective.is_finite() {
            self.trace.records.push(row);
            return Err(Error::NumericalBreakdown(format!("non-finite iterate at k = {k}")));
        }
        let status = if g <= target {
            Status::Converged
        } else if k >= cfg.max_iterations
            || self.calls >= cfg.max_oracle_calls
            || cfg.max_seconds.is_some_and(|s| row.time_s >= s)
        {
            Status::BudgetExhausted
        } else {
            return Ok(Some(row));
        };
        self.trace.records.push(row);
        self.trace.status = status;
        Ok(None)
    }

    /// Records the step taken from an opened row after `j` rejections.
    fn commit(&mut self, mut row: TraceRecord, j: usize, lambda: f64, step_norm: f64) {
        row.j = j;
        row.lambda = lambda;
        row.step_norm = step_norm;
        self.trace.records.push(row);
        self.calls += 1 + j;
    }

    /// Records an opened row without a step, for failures inside a step.
    fn abandon(&mut self, row: TraceRecord) {
        self.trace.records.push(row);
    }

    fn finish(mut self, x: DVector<f64>) -> Trace {
        self.trace.x = x;
        self.trace
    }

    fn fail(mut self, x: DVector<f64>, err: Error) -> Error {
        self.trace.x = x;
        self.trace.status = Status::Error(err.to_string());
        Error::RunFailed {
            source: Box::new(err),
            trace: Box::new(self.trace),
        }
    }
}

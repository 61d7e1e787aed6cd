//! Test problems, oracle verification and smoothness estimation.

mod fdcheck;
mod fixtures;
mod holder;
mod polytope;
pub mod rng;
mod softmax;
mod worst;

use std::fmt::Debug;
use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::composite::CompositePart;
use crate::error::{Error, Result};
use crate::metric::{Dual, Metric, Primal};

pub use fdcheck::{fd_check, fd_check_at, FdReport};
pub use fixtures::{
    make_composite_box, make_composite_l1, DiagonalQuadratic, Example1, LogSumExp, Quadratic, Quartic1d,
};
pub use holder::{estimate_holder, HolderOptions};
pub use polytope::{make_polytope, Polytope};
pub use softmax::{make_softmax, SoftMax};
pub use worst::{make_worst, WorstInstance};

/// Zeroth, first and second order information about the smooth part `f`.
pub trait SmoothOracle: Debug + Send + Sync {
    fn dim(&self) -> usize;

    fn value(&self, x: &DVector<f64>) -> f64;

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64>;

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64>;

    /// Distance from `x` to the nearest point where `∇²f` is not smooth, for
    /// piecewise-defined objectives. Used to keep finite-difference stencils
    /// away from kinks.
    fn kink_distance(&self, _x: &DVector<f64>) -> Option<f64> {
        None
    }
}

/// Descriptive data stored next to every trace.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct ProblemMeta {
    pub name: String,
    pub id: String,
    pub n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub p: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mu: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    /// Known optimal value `F*`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub f_star: Option<f64>,
    /// Known upper bound on the smoothness constant `M_q`.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mq_bound: Option<f64>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub flags: Vec<String>,
}

/// A composite problem `min F(x) = f(x) + ψ(x)` with its geometry and start.
#[derive(Clone, Debug)]
pub struct Problem {
    pub oracle: Arc<dyn SmoothOracle>,
    pub composite: Option<Arc<dyn CompositePart>>,
    pub metric: Metric,
    pub x0: Primal,
    pub meta: ProblemMeta,
}

impl Problem {
    pub fn new(oracle: Arc<dyn SmoothOracle>, metric: Metric, x0: Primal, meta: ProblemMeta) -> Result<Self> {
        let problem = Self {
            oracle,
            composite: None,
            metric,
            x0,
            meta,
        };
        problem.validate()?;
        Ok(problem)
    }

    /// Attaches a composite term. Only the identity metric is supported since
    /// the proximal maps are Euclidean.
    pub fn with_composite(mut self, psi: Arc<dyn CompositePart>) -> Result<Self> {
        if !self.metric.is_identity() {
            return Err(Error::UnsupportedMetric(
                "composite terms require the identity metric".into(),
            ));
        }
        if psi.subgradient(&self.x0).is_none() {
            return Err(Error::InvalidConfig("starting point is outside dom ψ".into()));
        }
        self.composite = Some(psi);
        Ok(self)
    }

    fn validate(&self) -> Result<()> {
        let n = self.oracle.dim();
        crate::error::check_dim(n, self.metric.dim())?;
        crate::error::check_dim(n, self.x0.len())?;
        let f = self.oracle.value(&self.x0);
        let g = self.oracle.gradient(&self.x0);
        if !f.is_finite() || g.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "oracle is not finite at the starting point of {}",
                self.meta.id
            )));
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.oracle.dim()
    }

    /// `ψ(x)`, zero when there is no composite term.
    pub fn psi(&self, x: &DVector<f64>) -> f64 {
        self.composite.as_ref().map_or(0.0, |p| p.value(x))
    }

    /// `F(x) = f(x) + ψ(x)`.
    pub fn objective(&self, x: &DVector<f64>) -> f64 {
        self.oracle.value(x) + self.psi(x)
    }

    pub fn gradient(&self, x: &Primal) -> Dual {
        Dual(self.oracle.gradient(x))
    }

    /// An element of `∂ψ(x)` to start the iteration from.
    pub fn initial_subgradient(&self, x: &Primal) -> Result<Dual> {
        match &self.composite {
            None => Ok(Dual::zeros(x.len())),
            Some(psi) => psi
                .subgradient(x)
                .map(Dual)
                .ok_or_else(|| Error::InvalidConfig("point is outside dom ψ".into())),
        }
    }
}

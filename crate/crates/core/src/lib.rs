//! Regularized Newton methods with adaptive, constant-free regularization.
//!
//! The main entry points are [`run_super_universal`], which adapts the
//! regularization constant on the fly, and [`run_fixed`] for a known
//! smoothness constant. [`baselines`] holds cubic Newton and first-order
//! comparison methods, [`problems`] the test problem generators, and
//! [`experiment`] the grid runner behind the command-line tool.

// `!(x > 0.0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baselines;
pub mod composite;
pub mod error;
pub mod experiment;
pub mod methods;
pub mod metric;
pub mod problems;
pub mod stats;
pub mod subproblem;
pub mod trace;

pub use baselines::{cubic_subproblem, run_cubic_newton, run_first_order, BaselineConfig, Variant};
pub use composite::{BoxIndicator, CompositePart, L1Norm, Zero};
pub use error::{Error, Result};
pub use experiment::{run_experiment, ExperimentConfig, Manifest};
pub use methods::{fixed_lambda, init_h0, run_fixed, run_super_universal, run_super_universal_with, SolverConfig};
pub use metric::{Dual, Metric, Primal};
pub use problems::{Problem, ProblemMeta, SmoothOracle};
pub use subproblem::{acceptance_check, implicit_subgradient, regularized_step, InnerOptions, LocalModel, StepResult};
pub use trace::{validate_csv, Status, Trace, TraceRecord};

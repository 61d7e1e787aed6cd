//! Small closed-form objectives used by tests, examples and composite
//! benchmarks.

use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::rng::DataRng;
use super::{make_polytope, Problem, ProblemMeta, SmoothOracle};
use crate::composite::{BoxIndicator, L1Norm};
use crate::error::Result;
use crate::metric::{Metric, Primal};

/// `f(x) = ½xᵀAx + bᵀx` with symmetric PSD `A`.
#[derive(Clone, Debug)]
pub struct Quadratic {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
}

impl Quadratic {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>) -> Self {
        assert_eq!(a.nrows(), b.len());
        Self { a, b }
    }
}

impl SmoothOracle for Quadratic {
    fn dim(&self) -> usize {
        self.b.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.dot(&(&self.a * x)) + self.b.dot(x)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x + &self.b
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        self.a.clone()
    }
}

/// `f(x) = ½ Σ dᵢ xᵢ²`.
#[derive(Clone, Debug)]
pub struct DiagonalQuadratic {
    pub diag: DVector<f64>,
}

impl DiagonalQuadratic {
    pub fn new(diag: Vec<f64>) -> Self {
        Self {
            diag: DVector::from_vec(diag),
        }
    }
}

impl SmoothOracle for DiagonalQuadratic {
    fn dim(&self) -> usize {
        self.diag.len()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.5 * x.iter().zip(self.diag.iter()).map(|(v, d)| d * v * v).sum::<f64>()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        x.component_mul(&self.diag)
    }

    fn hessian(&self, _x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_diagonal(&self.diag)
    }
}

/// `f(x) = ½x² + ⅙|x|³` on the real line: Lipschitz Hessian with constant 1
/// and a third derivative jumping by 2 at the origin.
#[derive(Clone, Copy, Debug, Default)]
pub struct Example1;

impl SmoothOracle for Example1 {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        let t = x[0];
        0.5 * t * t + t.abs().powi(3) / 6.0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let t = x[0];
        DVector::from_element(1, t + 0.5 * t.abs() * t)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 1.0 + x[0].abs())
    }

    fn kink_distance(&self, x: &DVector<f64>) -> Option<f64> {
        Some(x[0].abs())
    }
}

/// `f(x) = ¼x⁴` on the real line.
#[derive(Clone, Copy, Debug, Default)]
pub struct Quartic1d;

impl SmoothOracle for Quartic1d {
    fn dim(&self) -> usize {
        1
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        0.25 * x[0].powi(4)
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        DVector::from_element(1, x[0].powi(3))
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        DMatrix::from_element(1, 1, 3.0 * x[0] * x[0])
    }
}

/// `f(x) = μ ln Σ exp((⟨aᵢ, x⟩ − bᵢ)/μ)` with rows `aᵢ` of `a`.
#[derive(Clone, Debug)]
pub struct LogSumExp {
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub mu: f64,
}

impl LogSumExp {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, mu: f64) -> Self {
        assert_eq!(a.nrows(), b.len());
        assert!(mu > 0.0);
        Self { a, b, mu }
    }

    /// Returns `(f(x), π)` where `π` are the softmax weights.
    pub(crate) fn weights(&self, x: &DVector<f64>) -> (f64, DVector<f64>) {
        let z = (&self.a * x - &self.b) / self.mu;
        let zmax = z.max();
        let e = z.map(|v| (v - zmax).exp());
        let total = e.sum();
        (self.mu * (zmax + total.ln()), e / total)
    }
}

impl SmoothOracle for LogSumExp {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.weights(x).0
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let (_, pi) = self.weights(x);
        self.a.tr_mul(&pi)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let (_, pi) = self.weights(x);
        let g = self.a.tr_mul(&pi);
        let mut weighted = self.a.clone();
        for (mut row, w) in weighted.row_iter_mut().zip(pi.iter()) {
            row *= *w;
        }
        let h = (self.a.tr_mul(&weighted) - &g * g.transpose()) / self.mu;
        (&h + h.transpose()) * 0.5
    }
}

/// Polytope-feasibility objective (`p = 3`) with an `ℓ1` term, for composite
/// correctness runs.
pub fn make_composite_l1(n: usize, m: usize, weight: f64, seed: u64) -> Result<Problem> {
    let mut problem = make_polytope(n, m, 3.0, seed)?;
    problem.meta.name = "polytope_l1".into();
    problem.meta.id = format!("polytope_l1_n{n}_m{m}_w{weight}_s{seed}");
    problem.meta.f_star = None;
    problem.with_composite(Arc::new(L1Norm::new(weight)))
}

/// Log-sum-exp objective (`μ = 0.5`, identity metric) over the box
/// `[−1, 1]ⁿ`, started from a random interior point.
pub fn make_composite_box(n: usize, m: usize, seed: u64) -> Result<Problem> {
    let mut rng = DataRng::new(seed);
    let a = DMatrix::from_fn(m, n, |_, _| rng.symmetric());
    let b = DVector::from_fn(m, |_, _| rng.symmetric());
    let x0 = Primal(DVector::from_fn(n, |_, _| 0.5 * rng.symmetric()));
    let oracle = Arc::new(LogSumExp::new(a, b, 0.5));
    let meta = ProblemMeta {
        name: "logsumexp_box".into(),
        id: format!("logsumexp_box_n{n}_m{m}_s{seed}"),
        n,
        m: Some(m),
        mu: Some(0.5),
        seed: Some(seed),
        ..ProblemMeta::default()
    };
    let bounds = BoxIndicator::new(DVector::from_element(n, -1.0), DVector::from_element(n, 1.0));
    Problem::new(oracle, Metric::identity(n), x0, meta)?.with_composite(Arc::new(bounds))
}

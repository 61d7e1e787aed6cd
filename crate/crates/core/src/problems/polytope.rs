use std::sync::Arc;

use nalgebra::{DMatrix, DVector};

use super::rng::DataRng;
use super::{Problem, ProblemMeta, SmoothOracle};
use crate::error::{Error, Result};
use crate::metric::{Metric, Primal};

/// Polytope feasibility penalty `f(x) = Σᵢ (⟨aᵢ, x⟩ − bᵢ)₊ᵖ`.
#[derive(Clone, Debug)]
pub struct Polytope {
    /// Rows are the constraint normals `aᵢ`.
    pub a: DMatrix<f64>,
    pub b: DVector<f64>,
    pub p: f64,
    row_norms: DVector<f64>,
}

impl Polytope {
    pub fn new(a: DMatrix<f64>, b: DVector<f64>, p: f64) -> Self {
        assert_eq!(a.nrows(), b.len());
        let row_norms = DVector::from_iterator(a.nrows(), a.row_iter().map(|r| r.norm()));
        Self { a, b, p, row_norms }
    }

    fn slack(&self, x: &DVector<f64>) -> DVector<f64> {
        &self.a * x - &self.b
    }
}

impl SmoothOracle for Polytope {
    fn dim(&self) -> usize {
        self.a.ncols()
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.slack(x).iter().filter(|&&t| t > 0.0).map(|t| t.powf(self.p)).sum()
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let p = self.p;
        let w = self.slack(x).map(|t| if t > 0.0 { p * t.powf(p - 1.0) } else { 0.0 });
        self.a.tr_mul(&w)
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let p = self.p;
        let slack = self.slack(x);
        let active: Vec<usize> = (0..slack.len()).filter(|&i| slack[i] > 0.0).collect();
        let n = self.dim();
        if active.is_empty() {
            return DMatrix::zeros(n, n);
        }
        let rows = self.a.select_rows(active.iter());
        let mut weighted = rows.clone();
        for (k, &i) in active.iter().enumerate() {
            let w = p * (p - 1.0) * slack[i].powf(p - 2.0);
            weighted.row_mut(k).scale_mut(w);
        }
        let h = rows.tr_mul(&weighted);
        (&h + h.transpose()) * 0.5
    }

    fn kink_distance(&self, x: &DVector<f64>) -> Option<f64> {
        let slack = self.slack(x);
        slack
            .iter()
            .zip(self.row_norms.iter())
            .map(|(t, r)| t.abs() / r.max(f64::MIN_POSITIVE))
            .reduce(f64::min)
    }
}

/// Random polytope feasibility instance.
///
/// The entries of `A` (row by row) and then of `b` are drawn uniformly from
/// `[−1, 1]`; the start is `x₀ = (1, …, 1)` and the metric is the identity.
pub fn make_polytope(n: usize, m: usize, p: f64, seed: u64) -> Result<Problem> {
    if !(p >= 2.0) {
        return Err(Error::InvalidConfig(format!("polytope power must be at least 2, got {p}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("polytope dimensions must be positive".into()));
    }
    let mut rng = DataRng::new(seed);
    let mut a = DMatrix::zeros(m, n);
    for i in 0..m {
        for j in 0..n {
            a[(i, j)] = rng.symmetric();
        }
    }
    let b = DVector::from_iterator(m, (0..m).map(|_| rng.symmetric()));
    let meta = ProblemMeta {
        name: "polytope".into(),
        id: format!("polytope_n{n}_m{m}_p{p}"),
        n,
        m: Some(m),
        p: Some(p),
        seed: Some(seed),
        ..ProblemMeta::default()
    };
    Problem::new(
        Arc::new(Polytope::new(a, b, p)),
        Metric::identity(n),
        Primal(DVector::from_element(n, 1.0)),
        meta,
    )
}

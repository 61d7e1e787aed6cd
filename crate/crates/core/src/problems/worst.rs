use std::sync::Arc;

use nalgebra::{DMatrix, DVector};
use statrs::function::gamma::gamma;

use super::{Problem, ProblemMeta, SmoothOracle};
use crate::error::{Error, Result};
use crate::metric::{Metric, Primal};

/// Chain objective `f(x) = (1/q) Σᵢ<ₙ |xᵢ − xᵢ₊₁|^q + (1/q)|xₙ|^q`.
///
/// Each term is `φ(t) = |t|^q / q` with `φ''(t) = (q − 1)|t|^{q−2}`; the
/// Hessian is tridiagonal. For `q > 2` the second derivative vanishes at
/// `t = 0`, for `q = 2` it is the constant 1.
#[derive(Clone, Debug)]
pub struct WorstInstance {
    pub n: usize,
    pub q: f64,
}

impl WorstInstance {
    fn dphi(&self, t: f64) -> f64 {
        t.abs().powf(self.q - 1.0) * t.signum()
    }

    fn d2phi(&self, t: f64) -> f64 {
        if self.q == 2.0 {
            1.0
        } else {
            (self.q - 1.0) * t.abs().powf(self.q - 2.0)
        }
    }

    /// Differences `x₁ − x₂, …, xₙ₋₁ − xₙ, xₙ`.
    fn terms<'a>(&'a self, x: &'a DVector<f64>) -> impl Iterator<Item = f64> + 'a {
        let n = self.n;
        (0..n).map(move |i| if i + 1 < n { x[i] - x[i + 1] } else { x[i] })
    }
}

impl SmoothOracle for WorstInstance {
    fn dim(&self) -> usize {
        self.n
    }

    fn value(&self, x: &DVector<f64>) -> f64 {
        self.terms(x).map(|t| t.abs().powf(self.q)).sum::<f64>() / self.q
    }

    fn gradient(&self, x: &DVector<f64>) -> DVector<f64> {
        let mut g = DVector::zeros(self.n);
        for (i, t) in self.terms(x).enumerate() {
            let d = self.dphi(t);
            g[i] += d;
            if i + 1 < self.n {
                g[i + 1] -= d;
            }
        }
        g
    }

    fn hessian(&self, x: &DVector<f64>) -> DMatrix<f64> {
        let mut h = DMatrix::zeros(self.n, self.n);
        for (i, t) in self.terms(x).enumerate() {
            let w = self.d2phi(t);
            h[(i, i)] += w;
            if i + 1 < self.n {
                h[(i + 1, i + 1)] += w;
                h[(i, i + 1)] -= w;
                h[(i + 1, i)] -= w;
            }
        }
        h
    }

    fn kink_distance(&self, x: &DVector<f64>) -> Option<f64> {
        (self.q != 2.0).then(|| self.terms(x).map(f64::abs).fold(f64::INFINITY, f64::min))
    }
}

/// Worst-instance chain problem with `x₀ = (1, …, 1)`, identity metric,
/// `F* = 0` and the smoothness bound `M_q ≤ 2^q·Γ(q + 1)`.
pub fn make_worst(n: usize, q: f64) -> Result<Problem> {
    if !(q >= 2.0) {
        return Err(Error::InvalidConfig(format!("worst-instance power must be at least 2, got {q}")));
    }
    if n == 0 {
        return Err(Error::InvalidConfig("dimension must be positive".into()));
    }
    let meta = ProblemMeta {
        name: "worst".into(),
        id: format!("worst_n{n}_q{q}"),
        n,
        q: Some(q),
        f_star: Some(0.0),
        mq_bound: Some(2f64.powf(q) * gamma(q + 1.0)),
        ..ProblemMeta::default()
    };
    Problem::new(
        Arc::new(WorstInstance { n, q }),
        Metric::identity(n),
        Primal(DVector::from_element(n, 1.0)),
        meta,
    )
}

use std::sync::Arc;

use nalgebra::{Cholesky, DMatrix, DVector};

use super::fixtures::LogSumExp;
use super::rng::DataRng;
use super::{Problem, ProblemMeta, SmoothOracle};
use crate::error::{Error, Result};
use crate::metric::{Metric, Primal};

/// Soft maximum of affine functions; see [`make_softmax`].
pub type SoftMax = LogSumExp;

const ATTEMPTS: usize = 5;

/// Whether the Gram matrix is numerically full rank.
fn well_posed(gram: &DMatrix<f64>) -> bool {
    let n = gram.nrows();
    let scale = gram.trace() / n as f64;
    match Cholesky::new(gram.clone()) {
        Some(chol) => {
            let l = chol.l();
            (0..n).all(|i| l[(i, i)] * l[(i, i)] > 1e-12 * scale)
        }
        None => false,
    }
}

/// Soft-maximum instance with the optimum moved to the origin.
///
/// Rows `aᵢ` and then `b` are drawn uniformly from `[−1, 1]`. Every row is
/// shifted by `∇f(0)` of the unshifted data, which makes `∇f(0) = 0` since
/// the softmax weights at the origin do not depend on `aᵢ`. The metric is
/// `B = Σ aᵢaᵢᵀ` over the shifted rows. If `B` is rank deficient the data is
/// redrawn (continuing the same stream) up to five times; after that a ridge
/// `1e-8·tr(B)/n·I` is added and the `regularized_metric` flag set.
///
/// The start is `x₀ = (1, …, 1)` and `F* = f(0)`.
pub fn make_softmax(n: usize, m: usize, mu: f64, seed: u64) -> Result<Problem> {
    if !(mu > 0.0) {
        return Err(Error::InvalidConfig(format!("smoothing parameter must be positive, got {mu}")));
    }
    if n == 0 || m == 0 {
        return Err(Error::InvalidConfig("soft-max dimensions must be positive".into()));
    }
    let mut rng = DataRng::new(seed);
    let mut flags = Vec::new();
    let mut attempt = 0;
    let (oracle, gram) = loop {
        attempt += 1;
        let mut a = DMatrix::zeros(m, n);
        for i in 0..m {
            for j in 0..n {
                a[(i, j)] = rng.symmetric();
            }
        }
        let b = DVector::from_iterator(m, (0..m).map(|_| rng.symmetric()));
        let unshifted = LogSumExp::new(a, b, mu);
        let g0 = unshifted.gradient(&DVector::zeros(n));
        let LogSumExp { mut a, b, .. } = unshifted;
        for mut row in a.row_iter_mut() {
            row -= g0.transpose();
        }
        let gram = a.tr_mul(&a);
        let gram = (&gram + gram.transpose()) * 0.5;
        let oracle = LogSumExp::new(a, b, mu);
        if well_posed(&gram) {
            break (oracle, gram);
        }
        if attempt == ATTEMPTS {
            let ridge = 1e-8 * gram.trace() / n as f64;
            flags.push("regularized_metric".to_string());
            break (oracle, gram + DMatrix::identity(n, n) * ridge);
        }
    };
    if attempt > 1 {
        flags.push(format!("regenerated_{}", attempt - 1));
    }
    let f_star = oracle.value(&DVector::zeros(n));
    let meta = ProblemMeta {
        name: "softmax".into(),
        id: format!("softmax_n{n}_m{m}_mu{mu}"),
        n,
        m: Some(m),
        mu: Some(mu),
        seed: Some(seed),
        f_star: Some(f_star),
        flags,
        ..ProblemMeta::default()
    };
    Problem::new(
        Arc::new(oracle),
        Metric::dense(gram)?,
        Primal(DVector::from_element(n, 1.0)),
        meta,
    )
}

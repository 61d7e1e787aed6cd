use nalgebra::{Cholesky, DMatrix, DVector};

use super::rng::DataRng;
use super::SmoothOracle;
use crate::metric::{Metric, Primal};

/// Sampling box and budget for [`estimate_holder`].
#[derive(Clone, Debug, PartialEq)]
pub struct HolderOptions {
    pub pairs: usize,
    pub seed: u64,
    /// Points are drawn uniformly from `[lower, upper]ⁿ`.
    pub lower: f64,
    pub upper: f64,
    /// Random probe directions for third-derivative norms, on top of the
    /// direction `x − y` of the pair.
    pub directions: usize,
    /// Step of the Hessian differences that stand in for `∇³f`.
    pub fd_step: f64,
}

impl Default for HolderOptions {
    fn default() -> Self {
        Self {
            pairs: 10_000,
            seed: 0,
            lower: -1.0,
            upper: 1.0,
            directions: 8,
            fd_step: 1e-4,
        }
    }
}

/// Whitens symmetric matrices so the spectral norm equals the operator norm
/// `max_{‖h‖ ≤ 1} ‖Dh‖_*` of the metric.
struct Whitener(Option<DMatrix<f64>>);

impl Whitener {
    fn new(metric: &Metric) -> Self {
        if metric.is_identity() {
            return Self(None);
        }
        let chol = Cholesky::new(metric.matrix()).expect("metric is positive definite");
        let l_inv = chol.l().try_inverse().expect("triangular factor is invertible");
        Self(Some(l_inv))
    }

    fn norm(&self, d: &DMatrix<f64>) -> f64 {
        let w = match &self.0 {
            None => d.clone(),
            Some(l_inv) => l_inv * d * l_inv.transpose(),
        };
        let w = (&w + w.transpose()) * 0.5;
        w.symmetric_eigenvalues().amax()
    }
}

/// `∇³f(x)[h]³` by a central difference of Hessians along `h`.
fn third_directional(oracle: &dyn SmoothOracle, x: &DVector<f64>, h: &DVector<f64>, eps: f64) -> f64 {
    let plus = oracle.hessian(&(x + h * eps));
    let minus = oracle.hessian(&(x - h * eps));
    h.dot(&((plus - minus) * h)) / (2.0 * eps)
}

/// Sample lower bound on the Hölder constant
/// `L_{p,ν} = sup ‖∇ᵖf(x) − ∇ᵖf(y)‖ / ‖x − y‖^ν` for `p ∈ {2, 3}`.
///
/// Pairs are drawn sequentially from one stream, so a larger `pairs` with the
/// same seed never lowers the estimate.
pub fn estimate_holder(oracle: &dyn SmoothOracle, metric: &Metric, order: u32, nu: f64, opts: &HolderOptions) -> f64 {
    assert!(order == 2 || order == 3, "Hölder order must be 2 or 3");
    assert!((0.0..=1.0).contains(&nu), "Hölder degree must lie in [0, 1]");
    let n = oracle.dim();
    let mut rng = DataRng::new(opts.seed);
    let whitener = Whitener::new(metric);
    let mut best: f64 = 0.0;
    for _ in 0..opts.pairs {
        let x = DVector::from_fn(n, |_, _| rng.uniform(opts.lower, opts.upper));
        let y = DVector::from_fn(n, |_, _| rng.uniform(opts.lower, opts.upper));
        let diff = Primal(&x - &y);
        let dist = metric.primal_norm(&diff).expect("dimensions agree");
        if dist == 0.0 {
            continue;
        }
        let numerator = if order == 2 {
            whitener.norm(&(oracle.hessian(&x) - oracle.hessian(&y)))
        } else {
            let mut probes = vec![&*diff / dist];
            for _ in 0..opts.directions {
                let h = Primal(DVector::from_fn(n, |_, _| rng.symmetric()));
                let len = metric.primal_norm(&h).expect("dimensions agree");
                if len > 0.0 {
                    probes.push(&*h / len);
                }
            }
            probes
                .iter()
                .map(|h| {
                    (third_directional(oracle, &x, h, opts.fd_step) - third_directional(oracle, &y, h, opts.fd_step))
                        .abs()
                })
                .fold(0.0, f64::max)
        };
        best = best.max(numerator / dist.powf(nu));
    }
    best
}

use nalgebra::DVector;

use super::{BaselineConfig, Recorder, Variant};
use crate::error::{check_dim, Error, Result};
use crate::metric::{Dual, Primal};
use crate::problems::Problem;
use crate::trace::Trace;

/// Stationarity measure used by the first-order methods: `‖∇f(x)‖_*`, or
/// `dist(−∇f(x), ∂ψ(x))` with a composite term.
fn stationarity(problem: &Problem, x: &Primal, grad: &Dual) -> f64 {
    match &problem.composite {
        None => problem.metric.dual_norm(grad).unwrap_or(f64::NAN),
        Some(psi) => psi.subgradient_distance(&(-&grad.0), x),
    }
}

/// `prox_{step·ψ}(z)`, the identity without a composite term.
fn prox(problem: &Problem, z: DVector<f64>, step: f64) -> DVector<f64> {
    match &problem.composite {
        None => z,
        Some(psi) => psi.prox(&z, step),
    }
}

/// Upper quadratic model test `f(y) ≤ f(z) + ⟨∇f(z), y − z⟩ + (L/2)‖y − z‖²`.
///
/// When `f(y) − f(z)` is too small to be resolved in floating point, the
/// difference is replaced by the trapezoid value `½⟨∇f(y) + ∇f(z), y − z⟩`
/// (exact for quadratics), so the test stays meaningful near the solution.
fn upper_model_holds(problem: &Problem, f_y: f64, f_z: f64, grad_y: &Dual, grad_z: &Dual, d: &Primal, l: f64) -> Result<bool> {
    let r = problem.metric.primal_norm(d)?;
    let allowed = 0.5 * l * r * r;
    let scale = f_y.abs().max(f_z.abs()).max(1.0);
    if (f_y - f_z).abs() > 1e3 * f64::EPSILON * scale {
        Ok(f_y - f_z - grad_z.pair(d) <= allowed)
    } else {
        let curvature = 0.5 * Dual(&grad_y.0 - &grad_z.0).pair(d);
        Ok(curvature <= allowed)
    }
}

/// Adaptive gradient method or fast gradient method, by `cfg.variant`.
///
/// The gradient step is `x⁺ = prox_{ψ/L}(x − B⁻¹∇f(x)/L)`. The fast variant
/// is the similar-triangles scheme with `L a² = A + a`. In both, a trial
/// with constant `L` is accepted when the upper quadratic model (in the
/// `B` norm) holds between the gradient point and the new point; `L` is
/// then multiplied by `cfg.decrease`, otherwise by `cfg.increase`. One trial
/// (value and gradient at the new point) costs one oracle call. The `H` column holds `L` at the start of the
/// iteration and `lambda` the accepted `L`.
pub fn run_first_order(problem: &Problem, x0: &Primal, cfg: &BaselineConfig) -> Result<Trace> {
    cfg.validate()?;
    check_dim(problem.dim(), x0.len())?;
    let fast = match cfg.variant {
        Variant::Gradient => false,
        Variant::FastGradient => true,
        Variant::CubicNewton => {
            return Err(Error::InvalidConfig("run_first_order needs a first-order variant".into()));
        }
    };
    if problem.composite.is_some() && !problem.metric.is_identity() {
        return Err(Error::UnsupportedMetric("proximal steps need the identity metric".into()));
    }
    let oracle = problem.oracle.as_ref();
    let metric = &problem.metric;
    let mut rec = Recorder::new(cfg.variant.name(), x0);
    let mut l = cfg.initial_constant;
    let mut x = x0.clone();
    let mut f = oracle.value(&x);
    let mut grad = problem.gradient(&x);
    // Similar-triangles state.
    let mut v = x.clone();
    let mut big_a = 0.0;

    loop {
        let g = stationarity(problem, &x, &grad);
        let row = match rec.open(cfg, l, f, f + problem.psi(&x), g) {
            Ok(Some(row)) => row,
            Ok(None) => return Ok(rec.finish(x.0)),
            Err(e) => return Err(rec.fail(x.0, e)),
        };
        let mut accepted = None;
        for j in 0..=cfg.max_doublings {
            let outcome = if fast {
                let a = (1.0 + (1.0 + 4.0 * l * big_a).sqrt()) / (2.0 * l);
                let a_next = big_a + a;
                let y = Primal((&*x * big_a + &*v * a) / a_next);
                let f_y = oracle.value(&y);
                let grad_y = problem.gradient(&y);
                let dir = metric.to_primal(&grad_y)?;
                let v_next = Primal(prox(problem, &*v - &*dir * a, a));
                let x_next = Primal((&*x * big_a + &*v_next * a) / a_next);
                let f_next = oracle.value(&x_next);
                let grad_next = problem.gradient(&x_next);
                let d = Primal(&*x_next - &*y);
                upper_model_holds(problem, f_next, f_y, &grad_next, &grad_y, &d, l)
                    .map(|ok| ok.then_some((x_next, f_next, grad_next, Some((v_next, a_next)))))
            } else {
                let dir = metric.to_primal(&grad)?;
                let x_next = Primal(prox(problem, &*x - &*dir / l, 1.0 / l));
                let f_next = oracle.value(&x_next);
                let grad_next = problem.gradient(&x_next);
                let d = Primal(&*x_next - &*x);
                upper_model_holds(problem, f_next, f, &grad_next, &grad, &d, l)
                    .map(|ok| ok.then_some((x_next, f_next, grad_next, None)))
            };
            match outcome {
                Ok(Some(found)) => {
                    accepted = Some((j, l, found));
                    l *= cfg.decrease;
                    break;
                }
                Ok(None) => l *= cfg.increase,
                Err(e) => {
                    rec.abandon(row);
                    return Err(rec.fail(x.0, e));
                }
            }
        }
        let Some((j, l_used, (x_next, f_next, grad_next, state))) = accepted else {
            rec.abandon(row);
            return Err(rec.fail(
                x.0,
                Error::SearchStall {
                    trials: cfg.max_doublings + 1,
                },
            ));
        };
        let step_norm = metric.primal_norm(&Primal(&*x_next - &*x))?;
        rec.commit(row, j, l_used, step_norm);
        if let Some((v_next, a_next)) = state {
            v = v_next;
            big_a = a_next;
        }
        x = x_next;
        f = f_next;
        grad = grad_next;
    }
}

#[cfg(test)]
mod tests {
    use std::sync::Arc;

    use nalgebra::{DMatrix, DVector};

    use super::*;
    use crate::metric::Metric;
    use crate::problems::rng::DataRng;
    use crate::problems::{make_worst, DiagonalQuadratic, ProblemMeta, Quadratic, SmoothOracle};
    use crate::trace::Status;

    fn problem_of(oracle: impl SmoothOracle + 'static, x0: DVector<f64>) -> Problem {
        let n = x0.len();
        let meta = ProblemMeta {
            name: "fixture".into(),
            id: "fixture".into(),
            n,
            ..ProblemMeta::default()
        };
        Problem::new(Arc::new(oracle), Metric::identity(n), Primal(x0), meta).unwrap()
    }

    #[test]
    fn exact_constant_solves_quadratic_in_one_step() {
        let problem = problem_of(DiagonalQuadratic::new(vec![3.0]), DVector::from_element(1, 2.0));
        let cfg = BaselineConfig {
            initial_constant: 3.0,
            ..BaselineConfig::new(Variant::Gradient)
        };
        let trace = run_first_order(&problem, &problem.x0, &cfg).unwrap();
        assert_eq!(trace.status, Status::Converged);
        assert_eq!(trace.iterations(), 1);
        assert_eq!(trace.x[0], 0.0);
    }

    #[test]
    fn gradient_method_descends() {
        let problem = make_worst(12, 3.0).unwrap();
        let cfg = BaselineConfig {
            max_iterations: 300,
            ..BaselineConfig::new(Variant::Gradient)
        };
        let trace = run_first_order(&problem, &problem.x0, &cfg).unwrap();
        assert!(trace.records.windows(2).all(|w| w[1].f <= w[0].f));
    }

    /// Diagonal quadratic on `[1, 10⁴]` with a random start.
    fn ill_conditioned(n: usize) -> (Problem, f64) {
        let diag: Vec<f64> = (0..n).map(|i| 10f64.powf(4.0 * i as f64 / (n - 1) as f64)).collect();
        let mut rng = DataRng::new(5);
        let x0 = DVector::from_fn(n, |_, _| rng.symmetric());
        (problem_of(DiagonalQuadratic::new(diag), x0), 1e4)
    }

    fn iterations_to(trace: &Trace, level: f64) -> usize {
        trace.records.iter().position(|r| r.f <= level).expect("target reached")
    }

    #[test]
    fn fast_gradient_beats_gradient() {
        let (problem, _) = ill_conditioned(50);
        let run = |variant| {
            let cfg = BaselineConfig {
                tol_grad: 0.0,
                max_iterations: 300_000,
                ..BaselineConfig::new(variant)
            };
            run_first_order(&problem, &problem.x0, &cfg).unwrap()
        };
        let gm = run(Variant::Gradient);
        let fgm = run(Variant::FastGradient);
        let (kg, kf) = (iterations_to(&gm, 1e-6), iterations_to(&fgm, 1e-6));
        assert!(3 * kf <= kg, "fast {kf} vs plain {kg}");
    }

    #[test]
    fn doublings_per_iteration_are_bounded() {
        let (problem, l_true) = ill_conditioned(20);
        for variant in [Variant::Gradient, Variant::FastGradient] {
            let cfg = BaselineConfig {
                initial_constant: 1e-3,
                max_iterations: 200,
                ..BaselineConfig::new(variant)
            };
            let trace = run_first_order(&problem, &problem.x0, &cfg).unwrap();
            let bound = (l_true / 1e-3).log2() + 1.0;
            assert!(trace.records.iter().all(|r| r.j as f64 <= bound));
        }
    }

    #[test]
    fn proximal_gradient_respects_box() {
        let a = DMatrix::from_row_slice(2, 2, &[2.0, 0.5, 0.5, 1.0]);
        let f = Quadratic::new(a, DVector::from_column_slice(&[-4.0, 3.0]));
        let problem = problem_of(f, DVector::zeros(2))
            .with_composite(Arc::new(crate::composite::BoxIndicator::nonnegative(2)))
            .unwrap();
        for variant in [Variant::Gradient, Variant::FastGradient] {
            let trace = run_first_order(&problem, &problem.x0, &BaselineConfig::new(variant)).unwrap();
            assert_eq!(trace.status, Status::Converged);
            assert!(trace.x.iter().all(|&v| v >= 0.0));
            assert!((trace.x[0] - 2.0).abs() < 1e-6 && trace.x[1] == 0.0, "{:?}", trace.x);
        }
    }
}

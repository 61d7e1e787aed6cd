use nalgebra::{Cholesky, DVector, SymmetricEigen};
use regnewton::problems::rng::DataRng;
use regnewton::problems::{make_composite_l1, make_polytope, make_softmax, make_worst};
use regnewton::{
    run_cubic_newton, run_first_order, run_fixed, run_super_universal, validate_csv, BaselineConfig, Problem,
    SolverConfig, Status, Trace, Variant,
};

fn every_solver(problem: &Problem) -> Vec<Trace> {
    let cfg = SolverConfig {
        max_iterations: 200,
        ..SolverConfig::default()
    };
    let mut traces = vec![
        run_super_universal(problem, &problem.x0, &cfg).unwrap(),
        run_super_universal(problem, &problem.x0, &SolverConfig { alpha: 2.0 / 3.0, ..cfg.clone() }).unwrap(),
        run_first_order(problem, &problem.x0, &BaselineConfig::new(Variant::Gradient)).unwrap(),
        run_first_order(problem, &problem.x0, &BaselineConfig::new(Variant::FastGradient)).unwrap(),
    ];
    if problem.composite.is_none() {
        traces.push(run_cubic_newton(problem, &problem.x0, &BaselineConfig::new(Variant::CubicNewton)).unwrap());
    }
    traces
}

#[test]
fn solver_traces_pass_the_schema_validator() {
    let problems = [
        make_polytope(8, 24, 3.0, 1).unwrap(),
        make_worst(6, 3.0).unwrap(),
        make_composite_l1(6, 18, 0.1, 2).unwrap(),
    ];
    for problem in &problems {
        for trace in every_solver(problem) {
            let rows = validate_csv(trace.to_csv_string().as_bytes())
                .unwrap_or_else(|e| panic!("{} on {}: {e}", trace.solver, problem.meta.id));
            assert_eq!(rows, trace.records, "{} on {}", trace.solver, problem.meta.id);
            let last = rows.last().unwrap();
            assert_eq!((last.j, last.lambda, last.step_norm), (0, 0.0, 0.0));
        }
    }
}

#[test]
fn generators_are_deterministic_per_seed() {
    let point = DVector::from_element(10, 0.3);
    let build = |seed| {
        [
            make_polytope(10, 30, 2.0, seed).unwrap(),
            make_softmax(10, 30, 0.1, seed).unwrap(),
            make_composite_l1(10, 30, 0.1, seed).unwrap(),
        ]
    };
    let (a, b, c) = (build(11), build(11), build(12));
    for i in 0..3 {
        let value = |p: &Problem| p.oracle.value(&point);
        assert_eq!(value(&a[i]), value(&b[i]));
        assert_eq!(a[i].oracle.hessian(&point), b[i].oracle.hessian(&point));
        assert_ne!(value(&a[i]), value(&c[i]));
    }
}

/// Eigenvalues of `L⁻¹∇²f(x)L⁻ᵀ` with `B = LLᵀ` stay below `1/μ`.
#[test]
fn softmax_hessian_is_bounded_in_the_metric() {
    let mu = 0.1;
    let problem = make_softmax(10, 30, mu, 4).unwrap();
    let l = Cholesky::new(problem.metric.matrix()).unwrap().l();
    let l_inv = l.try_inverse().unwrap();
    let mut rng = DataRng::new(8);
    for _ in 0..100 {
        let x = DVector::from_fn(10, |_, _| 2.0 * rng.symmetric());
        let whitened = &l_inv * problem.oracle.hessian(&x) * l_inv.transpose();
        let whitened = (&whitened + whitened.transpose()) * 0.5;
        let top = SymmetricEigen::new(whitened).eigenvalues.max();
        assert!(top <= (1.0 + 1e-10) / mu, "largest eigenvalue {top}");
    }
}

/// Once `g ≤ 1e-3` on the soft-max instance, two consecutive steps have
/// `log g_{k+1} / log g_k ≥ 1.2`.
#[test]
fn softmax_tail_is_superlinear() {
    let problem = make_softmax(50, 200, 0.05, 0).unwrap();
    let cfg = SolverConfig {
        tol_grad: 0.0,
        max_iterations: 300,
        ..SolverConfig::default()
    };
    let trace = run_super_universal(&problem, &problem.x0, &cfg).unwrap();
    let g: Vec<f64> = trace.records.iter().map(|r| r.grad_norm).collect();
    let start = g.iter().position(|&v| v <= 1e-3).expect("reaches 1e-3");
    let fast: Vec<bool> = g[start..]
        .windows(2)
        .map(|w| w[1] > 0.0 && w[1].ln() / w[0].ln() >= 1.2)
        .collect();
    assert!(fast.windows(2).any(|w| w[0] && w[1]), "tail {:?}", &g[start..]);
}

#[test]
fn fixed_and_adaptive_methods_converge_on_worst_instances() {
    for q in [3.0, 4.0] {
        let problem = make_worst(10, q).unwrap();
        let cfg = SolverConfig {
            q,
            tol_grad: 1e-8,
            max_iterations: 500,
            ..SolverConfig::default()
        };
        let fixed = run_fixed(&problem, &problem.x0, &cfg).unwrap();
        let adaptive = run_super_universal(&problem, &problem.x0, &cfg).unwrap();
        assert_eq!(adaptive.status, Status::Converged, "q = {q}");
        assert!(fixed.final_grad_norm() < fixed.records[0].grad_norm);
        // Regularization adapted to the problem does at least as well as the worst-case constant.
        assert!(adaptive.iterations() <= fixed.iterations().max(1) * 2, "q = {q}");
    }
}

#[test]
fn budgets_stop_runs() {
    let problem = make_polytope(20, 60, 3.0, 9).unwrap();
    let cfg = SolverConfig {
        tol_grad: 0.0,
        max_oracle_calls: 15,
        ..SolverConfig::default()
    };
    let trace = run_super_universal(&problem, &problem.x0, &cfg).unwrap();
    assert_eq!(trace.status, Status::BudgetExhausted);
    assert!(trace.oracle_calls() <= 15 + 61);
    let gm = BaselineConfig {
        tol_grad: 0.0,
        max_iterations: 7,
        ..BaselineConfig::new(Variant::Gradient)
    };
    let trace = run_first_order(&problem, &problem.x0, &gm).unwrap();
    assert_eq!(trace.status, Status::BudgetExhausted);
    assert_eq!(trace.iterations(), 7);
}

//! Grid runner: every solver on every problem of a configuration, with one
//! CSV trace per run and a JSON manifest describing the whole grid.
//!
//! Output layout under `output_dir`:
//!
//! ```text
//! <experiment>/manifest.json
//! <experiment>/<problem-id>/problem.json
//! <experiment>/<problem-id>/<solver-id>.csv
//! ```

mod config;

use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

pub use config::{
    Budget, ExperimentConfig, Method, ProblemGrid, ProblemKind, ProblemSpec, Resolved, SolverParams, SolverSpec,
    Values, SCHEMA_VERSION,
};

use crate::baselines::{run_cubic_newton, run_first_order, Variant};
use crate::error::{Error, Result};
use crate::methods::{run_fixed, run_super_universal};
use crate::problems::{Problem, ProblemMeta};
use crate::trace::{Status, Trace};

/// Runs `solver` on `problem` from its start point.
pub fn run_solver(problem: &Problem, solver: &SolverSpec, budget: &Budget) -> Result<Trace> {
    let resolved = solver.resolve(problem, budget)?;
    let x0 = &problem.x0;
    match (solver.method, resolved) {
        (Method::SuperUniversal, Resolved::Newton(cfg)) => run_super_universal(problem, x0, &cfg),
        (Method::Fixed, Resolved::Newton(cfg)) => run_fixed(problem, x0, &cfg),
        (_, Resolved::Baseline(cfg)) if cfg.variant == Variant::CubicNewton => run_cubic_newton(problem, x0, &cfg),
        (_, Resolved::Baseline(cfg)) => run_first_order(problem, x0, &cfg),
        (_, Resolved::Newton(_)) => unreachable!("Newton settings resolve only for Newton methods"),
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunStatus {
    Converged,
    BudgetExhausted,
    Error,
}

/// One (problem, solver) cell of the grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunRecord {
    pub problem_id: String,
    pub solver_id: String,
    pub method: Method,
    /// Seed of the problem data, absent for deterministic families.
    pub seed: Option<u64>,
    /// Effective solver settings.
    pub params: serde_json::Value,
    pub status: RunStatus,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub message: Option<String>,
    /// Trace path relative to the experiment directory.
    pub trace_file: Option<String>,
    pub iterations: usize,
    pub oracle_calls: usize,
    /// Calls spent before the first iteration.
    pub setup_oracle_calls: usize,
    pub final_grad_norm: Option<f64>,
    pub final_objective: Option<f64>,
    /// Solver wall-clock time, excluding problem generation.
    pub time_s: f64,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Totals {
    pub runs: usize,
    pub converged: usize,
    pub budget_exhausted: usize,
    pub failed: usize,
    pub solver_time_s: f64,
    pub wall_time_s: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub experiment: String,
    pub seed: u64,
    pub jobs: usize,
    pub config: ExperimentConfig,
    pub problems: Vec<ProblemMeta>,
    pub runs: Vec<RunRecord>,
    pub totals: Totals,
}

impl Manifest {
    pub fn has_failures(&self) -> bool {
        self.totals.failed > 0
    }

    pub fn load(path: &Path) -> Result<Self> {
        Ok(serde_json::from_str(&fs::read_to_string(path)?)?)
    }
}

/// Directory that holds the outputs of `cfg`.
pub fn experiment_dir(cfg: &ExperimentConfig) -> PathBuf {
    cfg.output_dir.join(&cfg.name)
}

/// Creates the experiment directory and checks that a file can be written
/// there, leaving nothing behind on failure.
fn probe_output(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir)?;
    let probe = dir.join(".write-probe");
    fs::write(&probe, b"")?;
    fs::remove_file(&probe)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    fs::write(path, text)?;
    Ok(())
}

fn record_for(
    spec: &ProblemSpec,
    solver: &SolverSpec,
    seed: Option<u64>,
    params: serde_json::Value,
    outcome: &Result<Trace>,
    trace_file: Option<String>,
    time_s: f64,
) -> RunRecord {
    let (trace, message) = match outcome {
        Ok(t) => (Some(t), None),
        Err(Error::RunFailed { trace, source }) => (Some(trace.as_ref()), Some(source.to_string())),
        Err(e) => (None, Some(e.to_string())),
    };
    let status = match (outcome, trace.map(|t| &t.status)) {
        (Ok(_), Some(Status::Converged)) => RunStatus::Converged,
        (Ok(_), Some(Status::BudgetExhausted)) => RunStatus::BudgetExhausted,
        _ => RunStatus::Error,
    };
    let last = trace.and_then(Trace::last);
    RunRecord {
        problem_id: spec.id(),
        solver_id: solver.id.clone(),
        method: solver.method,
        seed,
        params,
        status,
        message,
        trace_file,
        iterations: trace.map_or(0, Trace::iterations),
        oracle_calls: trace.map_or(0, Trace::oracle_calls),
        setup_oracle_calls: trace.map_or(0, |t| t.setup_oracle_calls),
        final_grad_norm: last.map(|r| r.grad_norm),
        final_objective: last.map(|r| r.objective),
        time_s,
    }
}

fn run_cell(dir: &Path, spec: &ProblemSpec, problem: &Result<Problem>, solver: &SolverSpec, cfg: &ExperimentConfig) -> RunRecord {
    let seed = spec.seed(cfg.seed);
    let problem = match problem {
        Ok(p) => p,
        Err(e) => {
            let err = Err(Error::InvalidConfig(format!("problem generation failed: {e}")));
            return record_for(spec, solver, seed, serde_json::Value::Null, &err, None, 0.0);
        }
    };
    let params = solver
        .resolve(problem, &cfg.budget)
        .ok()
        .and_then(|r| serde_json::to_value(r).ok())
        .unwrap_or(serde_json::Value::Null);
    log::info!("running {} on {}", solver.id, spec.id());
    let start = Instant::now();
    let outcome = run_solver(problem, solver, &cfg.budget);
    let time_s = start.elapsed().as_secs_f64();

    let trace = match &outcome {
        Ok(t) => Some(t),
        Err(Error::RunFailed { trace, .. }) => Some(trace.as_ref()),
        Err(_) => None,
    };
    let mut trace_file = None;
    let mut write_error = None;
    if let Some(t) = trace.filter(|t| !t.records.is_empty()) {
        let rel = format!("{}/{}.csv", spec.id(), solver.id);
        match fs::File::create(dir.join(&rel)).map_err(Error::from).and_then(|f| t.write_csv(std::io::BufWriter::new(f))) {
            Ok(()) => trace_file = Some(rel),
            Err(e) => write_error = Some(e),
        }
    }
    let mut record = record_for(spec, solver, seed, params, &outcome, trace_file, time_s);
    if let Some(e) = write_error {
        record.status = RunStatus::Error;
        record.message = Some(format!("writing trace failed: {e}"));
    }
    if let Err(e) = &outcome {
        log::warn!("{} on {} failed: {e}", solver.id, spec.id());
    }
    record
}

/// Runs every solver on every problem of `cfg` and writes traces and the
/// manifest. Failed runs are recorded in the manifest; only configuration
/// and output-directory problems abort the experiment, before any run.
pub fn run_experiment(cfg: &ExperimentConfig) -> Result<Manifest> {
    cfg.validate()?;
    let dir = experiment_dir(cfg);
    probe_output(&dir)?;
    let start = Instant::now();
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.jobs)
        .build()
        .map_err(|e| Error::InvalidConfig(format!("cannot start {} worker threads: {e}", cfg.jobs)))?;

    let specs = cfg.problem_specs();
    let problems: Vec<Result<Problem>> = pool.install(|| specs.par_iter().map(|s| s.build(cfg.seed)).collect());
    for (spec, problem) in specs.iter().zip(&problems) {
        let pdir = dir.join(spec.id());
        fs::create_dir_all(&pdir)?;
        if let Ok(p) = problem {
            write_json(&pdir.join("problem.json"), &p.meta)?;
        }
    }

    let cells: Vec<(usize, &SolverSpec)> = (0..specs.len())
        .flat_map(|i| cfg.solvers.iter().map(move |s| (i, s)))
        .collect();
    let runs: Vec<RunRecord> = pool.install(|| {
        cells
            .par_iter()
            .map(|&(i, solver)| run_cell(&dir, &specs[i], &problems[i], solver, cfg))
            .collect()
    });

    let mut totals = Totals {
        runs: runs.len(),
        wall_time_s: start.elapsed().as_secs_f64(),
        ..Totals::default()
    };
    for r in &runs {
        totals.solver_time_s += r.time_s;
        match r.status {
            RunStatus::Converged => totals.converged += 1,
            RunStatus::BudgetExhausted => totals.budget_exhausted += 1,
            RunStatus::Error => totals.failed += 1,
        }
    }
    let manifest = Manifest {
        schema_version: SCHEMA_VERSION,
        experiment: cfg.name.clone(),
        seed: cfg.seed,
        jobs: cfg.jobs,
        config: cfg.clone(),
        problems: problems.iter().filter_map(|p| p.as_ref().ok().map(|p| p.meta.clone())).collect(),
        runs,
        totals,
    };
    write_json(&dir.join("manifest.json"), &manifest)?;
    Ok(manifest)
}

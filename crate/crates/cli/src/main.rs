//! `regnewton`: run solver-by-problem experiment grids and write CSV traces
//! plus a JSON manifest.
//!
//! Exit codes: 0 on success, 1 on usage, configuration or output errors,
//! 2 when the grid ran but some runs failed (or `fdtest` exceeded its
//! tolerance).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use regnewton::experiment::{experiment_dir, ProblemSpec};
use regnewton::problems::fd_check;
use regnewton::{run_experiment, ExperimentConfig, Manifest};

/// Largest accepted finite-difference error for `fdtest`.
const FD_TOLERANCE: f64 = 1e-5;

#[derive(Parser)]
#[command(name = "regnewton", version, about = "Regularized Newton experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run every solver on every problem of a configuration.
    Run {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Validate a configuration without running anything.
    Check {
        config: PathBuf,
        #[command(flatten)]
        overrides: Overrides,
    },
    /// Compare a generator's derivatives with finite differences.
    Fdtest {
        /// Problem id, e.g. `polytope_n20_m60_p3` or `softmax_n10_m30_mu0.1`.
        problem: String,
        /// Number of random sample points.
        #[arg(long, default_value_t = 10)]
        points: usize,
        /// Global seed used to derive the problem data.
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Run the small built-in grid.
    Demo {
        #[command(flatten)]
        overrides: Overrides,
    },
}

#[derive(Args)]
struct Overrides {
    /// Output directory (replaces `output_dir`).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Worker threads (replaces `jobs`).
    #[arg(long)]
    jobs: Option<usize>,
    /// Global seed (replaces `seed`).
    #[arg(long)]
    seed: Option<u64>,
}

impl Overrides {
    fn apply(self, cfg: &mut ExperimentConfig) -> regnewton::Result<()> {
        if let Some(out) = self.out {
            cfg.output_dir = out;
        }
        if let Some(jobs) = self.jobs {
            cfg.jobs = jobs;
        }
        if let Some(seed) = self.seed {
            cfg.seed = seed;
        }
        cfg.validate()
    }
}

fn load(path: &Path, overrides: Overrides) -> Result<ExperimentConfig, String> {
    let mut cfg = ExperimentConfig::load(path).map_err(|e| format!("{}: {e}", path.display()))?;
    overrides.apply(&mut cfg).map_err(|e| format!("{}: {e}", path.display()))?;
    Ok(cfg)
}

fn summarize(manifest: &Manifest, dir: &Path, elapsed: f64) -> ExitCode {
    let t = &manifest.totals;
    println!(
        "{}: {} runs ({} converged, {} budget exhausted, {} failed) in {elapsed:.2}s",
        manifest.experiment, t.runs, t.converged, t.budget_exhausted, t.failed
    );
    println!("manifest: {}", dir.join("manifest.json").display());
    for run in manifest.runs.iter().filter(|r| r.message.is_some()) {
        eprintln!("{} / {}: {}", run.problem_id, run.solver_id, run.message.as_deref().unwrap_or_default());
    }
    if manifest.has_failures() {
        ExitCode::from(2)
    } else {
        ExitCode::SUCCESS
    }
}

fn execute(cfg: ExperimentConfig) -> ExitCode {
    let start = Instant::now();
    match run_experiment(&cfg) {
        Ok(manifest) => summarize(&manifest, &experiment_dir(&cfg), start.elapsed().as_secs_f64()),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

fn fdtest(id: &str, points: usize, seed: u64) -> ExitCode {
    let problem = match ProblemSpec::parse(id).and_then(|spec| spec.build(seed)) {
        Ok(p) => p,
        Err(e) => {
            eprintln!("error: {e}");
            return ExitCode::from(1);
        }
    };
    let report = fd_check(&problem, points, seed);
    println!(
        "{id}: gradient error {:.3e}, Hessian error {:.3e} over {} points ({} resampled)",
        report.max_grad_error, report.max_hess_error, report.points, report.resampled
    );
    if report.max_grad_error.max(report.max_hess_error) <= FD_TOLERANCE {
        ExitCode::SUCCESS
    } else {
        eprintln!("error: finite-difference error above {FD_TOLERANCE:e}");
        ExitCode::from(2)
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) if !e.use_stderr() => {
            let _ = e.print();
            return ExitCode::SUCCESS;
        }
        Err(e) => {
            let _ = e.print();
            return ExitCode::from(1);
        }
    };
    let loaded = match cli.command {
        Command::Run { config, overrides } => load(&config, overrides),
        Command::Check { config, overrides } => {
            return match load(&config, overrides) {
                Ok(cfg) => {
                    let problems = cfg.problem_specs().len();
                    println!(
                        "{}: ok ({problems} problems × {} solvers = {} runs)",
                        cfg.name,
                        cfg.solvers.len(),
                        problems * cfg.solvers.len()
                    );
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("error: {e}");
                    ExitCode::from(1)
                }
            };
        }
        Command::Fdtest { problem, points, seed } => return fdtest(&problem, points, seed),
        Command::Demo { overrides } => {
            let mut cfg = ExperimentConfig::demo(PathBuf::from("results"));
            overrides.apply(&mut cfg).map(|()| cfg).map_err(|e| e.to_string())
        }
    };
    match loaded {
        Ok(cfg) => execute(cfg),
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}

use std::collections::HashSet;
use std::fmt;
use std::path::PathBuf;

use serde::{Deserialize, Serialize};

use crate::baselines::{BaselineConfig, Variant};
use crate::error::{Error, Result};
use crate::methods::SolverConfig;
use crate::problems::rng::derive_seed;
use crate::problems::{make_composite_box, make_composite_l1, make_polytope, make_softmax, make_worst, Problem};

pub const SCHEMA_VERSION: u32 = 1;

/// A single value or a list of values in a parameter grid.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Values<T> {
    One(T),
    Many(Vec<T>),
}

impl<T: Clone> Values<T> {
    pub fn to_vec(&self) -> Vec<T> {
        match self {
            Values::One(v) => vec![v.clone()],
            Values::Many(v) => v.clone(),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProblemKind {
    Polytope,
    Softmax,
    Worst,
    PolytopeL1,
    LogsumexpBox,
}

impl ProblemKind {
    const ALL: [ProblemKind; 5] = [
        ProblemKind::PolytopeL1,
        ProblemKind::Polytope,
        ProblemKind::Softmax,
        ProblemKind::Worst,
        ProblemKind::LogsumexpBox,
    ];

    pub fn name(self) -> &'static str {
        match self {
            ProblemKind::Polytope => "polytope",
            ProblemKind::Softmax => "softmax",
            ProblemKind::Worst => "worst",
            ProblemKind::PolytopeL1 => "polytope_l1",
            ProblemKind::LogsumexpBox => "logsumexp_box",
        }
    }

    pub fn is_composite(self) -> bool {
        matches!(self, ProblemKind::PolytopeL1 | ProblemKind::LogsumexpBox)
    }
}

/// One family of problems; list-valued parameters expand to their cartesian
/// product.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ProblemGrid {
    pub kind: ProblemKind,
    pub n: Values<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub m: Option<Values<usize>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub p: Option<Values<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub q: Option<Values<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mu: Option<Values<f64>>,
    /// Weight of the `ℓ1` term.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<Values<f64>>,
}

/// One point of a problem grid.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemSpec {
    pub kind: ProblemKind,
    pub n: usize,
    pub m: Option<usize>,
    pub p: Option<f64>,
    pub q: Option<f64>,
    pub mu: Option<f64>,
    pub weight: Option<f64>,
}

fn required<T: Copy>(value: Option<T>, kind: ProblemKind, field: &str) -> Result<T> {
    value.ok_or_else(|| Error::InvalidConfig(format!("{} problems need `{field}`", kind.name())))
}

impl ProblemSpec {
    fn bare(kind: ProblemKind, n: usize) -> Self {
        Self {
            kind,
            n,
            m: None,
            p: None,
            q: None,
            mu: None,
            weight: None,
        }
    }

    /// Parameters each kind needs, in id order.
    fn fields(kind: ProblemKind) -> &'static [&'static str] {
        match kind {
            ProblemKind::Polytope => &["m", "p"],
            ProblemKind::Softmax => &["m", "mu"],
            ProblemKind::Worst => &["q"],
            ProblemKind::PolytopeL1 => &["m", "w"],
            ProblemKind::LogsumexpBox => &["m"],
        }
    }

    fn field(&self, name: &str) -> Option<String> {
        match name {
            "m" => self.m.map(|v| v.to_string()),
            "p" => self.p.map(|v| v.to_string()),
            "q" => self.q.map(|v| v.to_string()),
            "mu" => self.mu.map(|v| v.to_string()),
            "w" => self.weight.map(|v| v.to_string()),
            _ => None,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.n == 0 {
            return Err(Error::InvalidConfig("problem dimension must be positive".into()));
        }
        for name in Self::fields(self.kind) {
            if self.field(name).is_none() {
                let field = if *name == "w" { "weight" } else { name };
                return Err(Error::InvalidConfig(format!("{} problems need `{field}`", self.kind.name())));
            }
        }
        Ok(())
    }

    /// Stable identifier such as `polytope_n100_m300_p2`.
    pub fn id(&self) -> String {
        let mut id = format!("{}_n{}", self.kind.name(), self.n);
        for name in Self::fields(self.kind) {
            if let Some(v) = self.field(name) {
                id.push_str(&format!("_{name}{v}"));
            }
        }
        id
    }

    /// Parses an identifier produced by [`ProblemSpec::id`].
    pub fn parse(id: &str) -> Result<Self> {
        let bad = || Error::InvalidConfig(format!("cannot parse problem id `{id}`"));
        let kind = ProblemKind::ALL
            .into_iter()
            .find(|k| id.strip_prefix(k.name()).is_some_and(|rest| rest.starts_with("_n")))
            .ok_or_else(bad)?;
        let rest = &id[kind.name().len() + 1..];
        let mut spec = Self::bare(kind, 0);
        for token in rest.split('_') {
            let num = |prefix: &str| token[prefix.len()..].parse::<f64>().map_err(|_| bad());
            if let Some(v) = token.strip_prefix("mu") {
                spec.mu = Some(v.parse().map_err(|_| bad())?);
            } else if let Some(v) = token.strip_prefix('n') {
                spec.n = v.parse().map_err(|_| bad())?;
            } else if let Some(v) = token.strip_prefix('m') {
                spec.m = Some(v.parse().map_err(|_| bad())?);
            } else if token.starts_with('p') {
                spec.p = Some(num("p")?);
            } else if token.starts_with('q') {
                spec.q = Some(num("q")?);
            } else if token.starts_with('w') {
                spec.weight = Some(num("w")?);
            } else {
                return Err(bad());
            }
        }
        spec.validate()?;
        if spec.id() != id {
            return Err(bad());
        }
        Ok(spec)
    }

    /// Seed of the instance data under the global seed, or `None` for
    /// deterministic families.
    pub fn seed(&self, global: u64) -> Option<u64> {
        (self.kind != ProblemKind::Worst).then(|| derive_seed(global, &self.id()))
    }

    pub fn build(&self, global_seed: u64) -> Result<Problem> {
        self.validate()?;
        let seed = self.seed(global_seed).unwrap_or(0);
        let k = self.kind;
        let mut problem = match k {
            ProblemKind::Polytope => make_polytope(self.n, required(self.m, k, "m")?, required(self.p, k, "p")?, seed),
            ProblemKind::Softmax => make_softmax(self.n, required(self.m, k, "m")?, required(self.mu, k, "mu")?, seed),
            ProblemKind::Worst => make_worst(self.n, required(self.q, k, "q")?),
            ProblemKind::PolytopeL1 => {
                make_composite_l1(self.n, required(self.m, k, "m")?, required(self.weight, k, "weight")?, seed)
            }
            ProblemKind::LogsumexpBox => make_composite_box(self.n, required(self.m, k, "m")?, seed),
        }?;
        problem.meta.id = self.id();
        Ok(problem)
    }
}

impl fmt::Display for ProblemSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.id())
    }
}

impl ProblemGrid {
    pub fn expand(&self) -> Vec<ProblemSpec> {
        fn axis<T: Clone>(v: &Option<Values<T>>) -> Vec<Option<T>> {
            match v {
                None => vec![None],
                Some(v) => v.to_vec().into_iter().map(Some).collect(),
            }
        }
        let mut out = Vec::new();
        for n in self.n.to_vec() {
            for m in axis(&self.m) {
                for p in axis(&self.p) {
                    for q in axis(&self.q) {
                        for mu in axis(&self.mu) {
                            for weight in axis(&self.weight) {
                                out.push(ProblemSpec {
                                    kind: self.kind,
                                    n,
                                    m,
                                    p,
                                    q,
                                    mu,
                                    weight,
                                });
                            }
                        }
                    }
                }
            }
        }
        out
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Method {
    SuperUniversal,
    Fixed,
    CubicNewton,
    Gradient,
    FastGradient,
}

/// Optional solver parameters; anything left out takes the solver default.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverParams {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub h0: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub search_h0: Option<bool>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<f64>,
    /// Falls back to the problem's known bound when absent.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub mq: Option<f64>,
    /// `M₀` or `L₀` of the baselines.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub initial_constant: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub inner_tol: Option<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SolverSpec {
    pub id: String,
    pub method: Method,
    #[serde(default)]
    pub params: SolverParams,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct Budget {
    pub max_iterations: usize,
    pub max_oracle_calls: usize,
    /// Wall-clock cap per run.
    pub max_seconds: Option<f64>,
    /// Stop once `g_k ≤ tol_grad · max(1, g₀)`.
    pub tol_grad: f64,
}

impl Default for Budget {
    fn default() -> Self {
        Self {
            max_iterations: 1000,
            max_oracle_calls: 10_000,
            max_seconds: Some(60.0),
            tol_grad: 1e-9,
        }
    }
}

/// Solver settings resolved against a problem.
#[derive(Clone, Debug, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Resolved {
    Newton(SolverConfig),
    Baseline(BaselineConfig),
}

impl SolverSpec {
    pub fn resolve(&self, problem: &Problem, budget: &Budget) -> Result<Resolved> {
        let p = &self.params;
        match self.method {
            Method::SuperUniversal | Method::Fixed => {
                let d = SolverConfig::default();
                let mq = match (self.method, p.mq.or(problem.meta.mq_bound)) {
                    (Method::Fixed, None) => {
                        return Err(Error::InvalidConfig(format!(
                            "solver `{}` needs `mq` for problem {}",
                            self.id, problem.meta.id
                        )))
                    }
                    (_, mq) => mq.unwrap_or(d.mq),
                };
                Ok(Resolved::Newton(SolverConfig {
                    alpha: p.alpha.unwrap_or(d.alpha),
                    h0: p.h0.unwrap_or(d.h0),
                    search_h0: p.search_h0.unwrap_or(d.search_h0),
                    q: p.q.or(problem.meta.q).unwrap_or(d.q),
                    mq,
                    max_iterations: budget.max_iterations,
                    max_oracle_calls: budget.max_oracle_calls,
                    max_seconds: budget.max_seconds,
                    tol_grad: budget.tol_grad,
                    inner_tol: p.inner_tol,
                    ..d
                }))
            }
            Method::CubicNewton | Method::Gradient | Method::FastGradient => {
                let variant = match self.method {
                    Method::CubicNewton => Variant::CubicNewton,
                    Method::Gradient => Variant::Gradient,
                    _ => Variant::FastGradient,
                };
                let d = BaselineConfig::new(variant);
                Ok(Resolved::Baseline(BaselineConfig {
                    initial_constant: p.initial_constant.unwrap_or(d.initial_constant),
                    max_iterations: budget.max_iterations,
                    max_oracle_calls: budget.max_oracle_calls,
                    max_seconds: budget.max_seconds,
                    tol_grad: budget.tol_grad,
                    ..d
                }))
            }
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub schema_version: u32,
    /// Experiment name; also the subdirectory of `output_dir`.
    pub name: String,
    pub problems: Vec<ProblemGrid>,
    pub solvers: Vec<SolverSpec>,
    #[serde(default)]
    pub budget: Budget,
    pub output_dir: PathBuf,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "one")]
    pub jobs: usize,
}

fn one() -> usize {
    1
}

fn path_safe(s: &str) -> bool {
    !s.is_empty() && s.chars().all(|c| c.is_ascii_alphanumeric() || matches!(c, '_' | '-' | '.')) && s != "." && s != ".."
}

impl ExperimentConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: Self = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &std::path::Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn problem_specs(&self) -> Vec<ProblemSpec> {
        self.problems.iter().flat_map(ProblemGrid::expand).collect()
    }

    pub fn validate(&self) -> Result<()> {
        let invalid = |msg: String| Err(Error::InvalidConfig(msg));
        if self.schema_version != SCHEMA_VERSION {
            return invalid(format!(
                "unsupported schema_version {} (expected {SCHEMA_VERSION})",
                self.schema_version
            ));
        }
        if !path_safe(&self.name) {
            return invalid(format!("experiment name `{}` is not a valid directory name", self.name));
        }
        if self.jobs == 0 {
            return invalid("jobs must be at least 1".into());
        }
        if self.solvers.is_empty() {
            return invalid("solver list is empty".into());
        }
        let specs = self.problem_specs();
        if specs.is_empty() {
            return invalid("problem grid is empty".into());
        }
        let mut ids = HashSet::new();
        for spec in &specs {
            spec.validate()?;
            if !ids.insert(spec.id()) {
                return invalid(format!("problem {} appears twice in the grid", spec.id()));
            }
        }
        let mut solver_ids = HashSet::new();
        for s in &self.solvers {
            if !path_safe(&s.id) || s.id == "problem" || s.id == "manifest" {
                return invalid(format!("solver id `{}` is not a valid file name", s.id));
            }
            if !solver_ids.insert(s.id.as_str()) {
                return invalid(format!("solver id `{}` appears twice", s.id));
            }
            if s.method == Method::CubicNewton && specs.iter().any(|p| p.kind.is_composite()) {
                return invalid(format!("solver `{}`: cubic Newton does not handle composite problems", s.id));
            }
        }
        let b = &self.budget;
        if !(b.tol_grad >= 0.0) || b.max_seconds.is_some_and(|s| !(s > 0.0)) {
            return invalid("budget values must be non-negative".into());
        }
        Ok(())
    }

    /// Small built-in grid used by `demo`: two polytope instances and one
    /// worst instance against all five solvers.
    pub fn demo(output_dir: PathBuf) -> Self {
        let solver = |id: &str, method, alpha| SolverSpec {
            id: id.into(),
            method,
            params: SolverParams {
                alpha,
                ..SolverParams::default()
            },
        };
        Self {
            schema_version: SCHEMA_VERSION,
            name: "demo".into(),
            problems: vec![
                ProblemGrid {
                    kind: ProblemKind::Polytope,
                    n: Values::One(20),
                    m: Some(Values::One(60)),
                    p: Some(Values::Many(vec![2.0, 3.0])),
                    q: None,
                    mu: None,
                    weight: None,
                },
                ProblemGrid {
                    kind: ProblemKind::Worst,
                    n: Values::One(10),
                    m: None,
                    p: None,
                    q: Some(Values::One(3.0)),
                    mu: None,
                    weight: None,
                },
            ],
            solvers: vec![
                solver("sun_alpha_2_3", Method::SuperUniversal, Some(2.0 / 3.0)),
                solver("sun_alpha_1", Method::SuperUniversal, Some(1.0)),
                solver("cnm", Method::CubicNewton, None),
                solver("gm", Method::Gradient, None),
                solver("fgm", Method::FastGradient, None),
            ],
            budget: Budget {
                max_iterations: 500,
                max_oracle_calls: 2000,
                max_seconds: Some(10.0),
                tol_grad: 1e-9,
            },
            output_dir,
            seed: 0,
            jobs: 1,
        }
    }
}

use nalgebra::DVector;

use crate::trace::Trace;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("metric operator is not symmetric positive definite")]
    MetricNotPositiveDefinite,

    #[error("numerical breakdown: {0}")]
    NumericalBreakdown(String),

    /// The inner proximal solver hit its iteration cap. `best` is the iterate
    /// with the smallest optimality residual seen.
    #[error("inner solver did not converge after {iterations} iterations (residual {residual:.3e})")]
    InnerNonconvergence {
        iterations: usize,
        residual: f64,
        best: DVector<f64>,
    },

    #[error("adaptive search stalled: {trials} trials without acceptance")]
    SearchStall { trials: usize },

    #[error("initial regularization search failed after {attempts} attempts")]
    InitializationFailure { attempts: usize },

    #[error("unsupported metric: {0}")]
    UnsupportedMetric(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    /// A solver run failed part-way; the trace up to the failure is kept.
    #[error("run failed after {} iterations: {source}", trace.records.len())]
    RunFailed {
        source: Box<Error>,
        trace: Box<Trace>,
    },

    #[error("malformed trace: {0}")]
    MalformedTrace(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub(crate) fn check_dim(expected: usize, found: usize) -> Result<()> {
    if expected == found {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { expected, found })
    }
}

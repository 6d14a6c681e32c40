use thiserror::Error;

/// One Newton iterate, kept for convergence diagnostics.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct IterateTrace {
    pub iteration: usize,
    pub theta: Vec<f64>,
    pub loglik: f64,
    pub score_norm: f64,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid dimension: {0}")]
    InvalidDimension(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported family: {0}")]
    UnsupportedFamily(String),

    #[error("maximum likelihood iteration did not converge after {} iterations", trace.len())]
    ConvergenceFailure { trace: Vec<IterateTrace> },

    #[error("observed information is singular or not positive definite: {0}")]
    SingularInformation(String),

    #[error("could not bracket the reference value for coordinate {coordinate} (y = {y})")]
    ReferenceSolveFailure { coordinate: usize, y: f64 },

    #[error("tangent array has rank {rank} < {p}")]
    DegenerateTangent {
        rank: usize,
        p: usize,
        /// Right singular vectors spanning the (numerical) null space of V.
        null_directions: Vec<Vec<f64>>,
    },

    #[error("degenerate model: {0}")]
    DegenerateModel(String),

    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("numerical failure: {0}")]
    NumericalFailure(String),

    #[error("study has no replicates")]
    EmptyStudy,

    #[error("{completed} of {total} batches completed before failure: {source}")]
    PartialResults {
        completed: usize,
        total: usize,
        /// Per-batch results that did finish, in batch order.
        batches: Vec<crate::montecarlo::BatchCounts>,
        #[source]
        source: Box<Error>,
    },

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    /// An argument lies outside the support of the operation.
    #[error("domain error: {0}")]
    Domain(String),

    #[error("not enough residual degrees of freedom: {observations} observations for {parameters} parameters")]
    DegreesOfFreedom {
        observations: usize,
        parameters: usize,
    },

    /// Pearson dispersion collapsed to zero (fitted means reproduce the data).
    #[error("degenerate dispersion: all Pearson residuals are zero")]
    DegenerateDispersion,

    #[error("degenerate anchor at {0}: basis vanishes there")]
    DegenerateAnchor(f64),

    #[error("records out of order: period {current} follows period {previous}")]
    Ordering { previous: i32, current: i32 },

    #[error("configuration error: {0}")]
    Config(String),

    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: usize, got: usize },

    #[error("usage error: {0}")]
    Usage(String),

    #[error("no convergence after {iterations} iterations (gradient max-norm {gradient_norm:.3e})")]
    Convergence {
        iterations: usize,
        gradient_norm: f64,
        last_iterate: Vec<f64>,
    },

    #[error("design matrix is rank deficient at column {column} ({name})")]
    Rank { column: usize, name: String },

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("no feasible claim-score configuration: {0}")]
    Infeasible(String),

    #[error("cannot split: portfolio spans {0} calendar year(s), need at least 2")]
    Split(usize),

    #[error("{file} row {row}: {message}")]
    Validation {
        file: String,
        row: usize,
        message: String,
    },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn domain(msg: impl Into<String>) -> Self {
        Error::Domain(msg.into())
    }
}

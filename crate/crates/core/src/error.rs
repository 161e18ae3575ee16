use thiserror::Error;

/// Errors raised anywhere in the pipeline.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("field has non-zero mean {mean:.3e} (tolerance {tol:.1e})")]
    NonZeroMean { mean: f64, tol: f64 },

    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),

    #[error("unknown radial integrand `{0}`")]
    UnknownIntegrand(String),

    #[error("invalid weight: {0}")]
    InvalidWeight(String),

    #[error("rho = {0} lies in 8*pi*N; the base equation is not solvable there")]
    RhoForbidden(f64),

    #[error("Newton iteration did not converge after {iters} steps (residual {residual:.3e})")]
    NoConvergence { iters: usize, residual: f64 },

    #[error("base solution is degenerate (margin {0:.3e})")]
    Degenerate(f64),

    #[error("parameter out of range: {0}")]
    OutOfRange(String),

    #[error("under-resolved: {0}")]
    UnderResolved(String),

    #[error("linear solve did not converge: {iters} iterations, residual {residual:.3e}")]
    LinearNoConvergence { iters: usize, residual: f64 },

    #[error("contraction diverged at iteration {iter}: {reason}")]
    ContractionDiverged { iter: usize, reason: String },

    #[error("q adjustment diverged after {iters} steps (|c| = {c_norm:.3e})")]
    QAdjustDiverged { iters: usize, c_norm: f64 },

    #[error("maximum of the scaled profile lies outside the core (|p_t| = {0:.3e})")]
    MaxNotInCore(f64),

    #[error("fit needs at least 3 points, got {0}")]
    TooFewPoints(usize),

    #[error("config: {0}")]
    Config(String),

    #[error("field dump: {0}")]
    Dump(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

use thiserror::Error;

/// Errors produced by the simulation and quadrature layers.
#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("zero-drift case out of scope")]
    ZeroDrift,

    #[error("domain error: {0}")]
    Domain(String),

    #[error("quadrature did not converge: error estimate {estimate:.3e} exceeds tolerance {tolerance:.3e}")]
    QuadratureNoConvergence { estimate: f64, tolerance: f64 },

    #[error("integral diverges: {0}")]
    Divergent(String),

    #[error("step size {dt} violates the resolution guard (max allowed {max_dt}): {detail}")]
    StepResolution { dt: f64, max_dt: f64, detail: String },

    #[error("requested time {requested} beyond trajectory coverage {coverage}")]
    Coverage { requested: f64, coverage: f64 },

    #[error("called in wrong regime: {0}")]
    WrongRegime(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("circulant embedding is not positive semidefinite (min eigenvalue {min_eigenvalue:.3e})")]
    EmbeddingNotPsd { min_eigenvalue: f64 },

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("parse error: {0}")]
    Parse(String),
}

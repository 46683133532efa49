use thiserror::Error;

/// Failure modes shared across the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {context}: expected {expected}, got {got}")]
    DimensionMismatch {
        context: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("iterative solver stalled: residual {residual:.3e} after {iterations} iterations")]
    NonConvergence { iterations: usize, residual: f64 },

    #[error("factorization failed in {context}")]
    FactorizationFailure { context: &'static str },

    #[error("no prior support found after {attempts} rejection attempts")]
    EmptySupport { attempts: u64 },

    #[error("invalid proposal weights: {reason}")]
    InvalidWeights { reason: String },

    #[error("degenerate fault geometry: {detail}")]
    DegenerateGeometry { detail: String },

    #[error("invalid parameter: {detail}")]
    InvalidParameter { detail: String },

    #[error("numerical incident rate too high: {incidents} failed evaluations out of {evaluations}")]
    IncidentRate { incidents: u64, evaluations: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;

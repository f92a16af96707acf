use thiserror::Error;

/// Errors raised by the estimation and simulation routines.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum OpdError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("unsupported pattern order {h} (supported: {min}..={max})")]
    UnsupportedOrder { h: usize, min: usize, max: usize },

    #[error(
        "circulant embedding failed for H={hurst}, n={n}: eigenvalue {min_eigenvalue:e} below tolerance"
    )]
    GenerationFailure {
        hurst: f64,
        n: usize,
        min_eigenvalue: f64,
    },

    #[error("model inconsistency: {0}")]
    ModelInconsistency(String),

    #[error("degenerate marginal pattern distribution: q = {q}")]
    DegenerateMarginals { q: f64 },

    #[error("regime error: {0}")]
    Regime(String),

    #[error("ill-conditioned covariance matrix (condition number {condition:e})")]
    IllConditioned { condition: f64 },

    #[error("assumption violated: {0}")]
    Assumption(String),

    #[error("replication {index}: {source}")]
    Replication {
        index: usize,
        #[source]
        source: Box<OpdError>,
    },
}

impl OpdError {
    /// True for failures of the numerics (as opposed to bad user input).
    pub fn is_numeric(&self) -> bool {
        match self {
            OpdError::GenerationFailure { .. }
            | OpdError::ModelInconsistency(_)
            | OpdError::DegenerateMarginals { .. }
            | OpdError::IllConditioned { .. } => true,
            OpdError::Replication { source, .. } => source.is_numeric(),
            _ => false,
        }
    }
}

pub type Result<T> = std::result::Result<T, OpdError>;

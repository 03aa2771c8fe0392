use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    Dimension { expected: usize, got: usize },

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("no closed-form conjugate registered for {0}")]
    UnsupportedConjugate(String),

    #[error("proximity operator unavailable: {0}")]
    UnsupportedProx(String),

    #[error("unsupported dimension {0} (at most 2 supported)")]
    UnsupportedDimension(usize),

    #[error("operator not admissible: {0}")]
    Admissibility(String),

    #[error("power iteration did not converge after {0} iterations")]
    NormNotConverged(usize),

    #[error("unknown suite `{0}`")]
    Registry(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn dim(expected: usize, got: usize) -> Self {
        Error::Dimension { expected, got }
    }

    pub(crate) fn param(msg: impl Into<String>) -> Self {
        Error::Parameter(msg.into())
    }
}

/// Returns a dimension error unless `expected == got`.
pub(crate) fn check_dim(expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::dim(expected, got))
    }
}

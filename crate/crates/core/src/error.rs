use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid kernel: {0}")]
    InvalidKernel(String),

    #[error("resolution error: {0}")]
    Resolution(String),

    #[error("numeric failure: {what} (residual {residual:e})")]
    NumericFailure { what: String, residual: f64 },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("bracket failure: {0}")]
    BracketFailure(String),

    #[error("hypothesis violated: {0}")]
    HypothesisViolation(String),

    #[error("no root: {0}")]
    NoRoot(String),

    #[error("invalid parameters: {0}")]
    InvalidParams(String),

    #[error("state outside the invariant box H: {0}")]
    HViolation(String),

    #[error("instability at t = {t}: undershoot {value:e}; reduce dt")]
    Instability { t: f64, value: f64 },

    #[error("boundary contamination at t = {t}: {species} reaches {ratio:e} of peak at the {side} wall; enlarge the grid")]
    BoundaryContamination {
        t: f64,
        species: &'static str,
        side: &'static str,
        ratio: f64,
    },

    #[error("no front: {0}")]
    NoFront(String),

    #[error("insufficient data: {0}")]
    InsufficientData(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("unknown configuration key `{0}`")]
    UnknownKey(String),

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}

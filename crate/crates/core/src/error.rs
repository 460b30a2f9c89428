use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure classes surfaced by the library.
///
/// The CLI maps these onto exit codes: configuration problems, data problems
/// and numeric failures are kept as separate families.
#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("node {node} is isolated; no walk can leave it")]
    DegenerateWalk { node: usize },

    #[error(
        "exact enumeration needs {walks} walks (limit {limit}); use Monte Carlo sampling instead"
    )]
    EnumerationTooLarge { walks: u128, limit: u128 },

    #[error("numeric failure: {0}")]
    Numeric(String),

    #[error("artifact error: {0}")]
    Artifact(String),

    #[error("checksum mismatch in {0}")]
    Checksum(String),

    #[error("missing structural embedding: {0}")]
    MissingEmbedding(String),

    #[error("{context}: {source}")]
    Io {
        context: String,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),
}

impl Error {
    pub fn io(context: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            context: context.into(),
            source,
        }
    }

    /// True for errors caused by bad user-supplied settings.
    pub fn is_config(&self) -> bool {
        matches!(self, Error::Config(_))
    }

    /// True for numerical blow-ups (NaN losses, non-finite gradients).
    pub fn is_numeric(&self) -> bool {
        matches!(self, Error::Numeric(_))
    }
}

use std::path::PathBuf;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("schema error: {0}")]
    Schema(String),

    #[error("query error: {0}")]
    Query(String),

    /// Containment is only defined between queries with identical FROM clauses.
    #[error("containment-domain error: {0}")]
    ContainmentDomain(String),

    #[error("featurization error: {0}")]
    Featurization(String),

    #[error("shape error: expected width {expected}, got {actual}")]
    Shape { expected: usize, actual: usize },

    #[error("numeric error: {0}")]
    Numeric(String),

    #[error("training diverged at epoch {epoch}: {reason}")]
    Training { epoch: usize, reason: String },

    #[error("cannot perturb query: {0}")]
    EmptyPerturbation(String),

    #[error("checkpoint error: {0}")]
    Checkpoint(String),

    #[error("format error in {path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

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

    /// Short machine-readable category, used by the CLI for exit reporting.
    pub fn category(&self) -> &'static str {
        match self {
            Error::Schema(_) => "schema-error",
            Error::Query(_) => "query-error",
            Error::ContainmentDomain(_) => "containment-domain-error",
            Error::Featurization(_) => "featurization-error",
            Error::Shape { .. } => "shape-error",
            Error::Numeric(_) => "numeric-error",
            Error::Training { .. } => "training-error",
            Error::EmptyPerturbation(_) => "empty-perturbation-error",
            Error::Checkpoint(_) => "checkpoint-error",
            Error::Format { .. } | Error::Json(_) | Error::Csv(_) => "format-error",
            Error::Io { .. } => "io-error",
        }
    }
}

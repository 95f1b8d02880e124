use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

/// Coarse failure class, used by front ends to pick an exit status.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorClass {
    Data,
    Numerical,
}

#[derive(Debug, Error)]
pub enum Error {
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("line {line}: duplicate edge {source_label} -[{relation}]-> {target_label}")]
    DuplicateEdge {
        line: usize,
        source_label: String,
        relation: String,
        target_label: String,
    },

    #[error("is-a cycle detected through concept `{concept}`")]
    Cycle { concept: String },

    #[error("unknown concept `{0}`")]
    UnknownConcept(String),

    #[error("unknown label `{0}`: not present in the embedding table")]
    UnknownLabel(String),

    #[error("unknown {kind} `{name}` (registered: {available})")]
    UnknownStrategy {
        kind: &'static str,
        name: String,
        available: String,
    },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("empty input: {0}")]
    EmptyInput(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error(
        "enrichment diverges: estimated spectral radius {spectral_radius:.6}, alpha {alpha} \
         (alpha must stay below {max_alpha:.6})"
    )]
    Divergence {
        spectral_radius: f64,
        alpha: f64,
        max_alpha: f64,
    },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("degenerate row for concept `{concept}`: zero norm after projection")]
    DegenerateRow { concept: String },

    #[error("degenerate vector: {0}")]
    DegenerateVector(String),

    #[error("training diverged at epoch {epoch}, batch {batch}: non-finite loss")]
    TrainingDiverged { epoch: usize, batch: usize },

    #[error("protocol error: {0}")]
    Protocol(String),

    #[error("malformed file {path}: {message}")]
    Format { path: PathBuf, message: String },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn class(&self) -> ErrorClass {
        match self {
            Error::Divergence { .. }
            | Error::Numerical(_)
            | Error::DegenerateRow { .. }
            | Error::DegenerateVector(_)
            | Error::TrainingDiverged { .. } => ErrorClass::Numerical,
            _ => ErrorClass::Data,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, message: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            message: message.into(),
        }
    }
}

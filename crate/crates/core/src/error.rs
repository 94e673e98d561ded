use std::path::PathBuf;

use crate::screening::Exclusion;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error("line {line}: {msg}")]
    Parse { line: u64, msg: String },

    #[error("manifest mismatch: {0}")]
    ManifestMismatch(String),

    #[error("invalid manifest: {0}")]
    Manifest(String),

    #[error("empty panel: {0}")]
    EmptyPanel(String),

    #[error("no tests common to all cohorts ({0}); check the screening reports")]
    EmptyIntersection(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("degenerate input: {0}")]
    Degenerate(String),

    #[error("screening failed: {reason}")]
    ScreeningFailed {
        reason: String,
        removals: Vec<Exclusion>,
    },

    #[error("separation detected (columns: {})", columns.join(", "))]
    Separation { columns: Vec<String> },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("internal consistency check failed: {0}")]
    Consistency(String),

    #[error("cohorts are inconsistent: {0}")]
    Inconsistent(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code for the CLI: 1 input, 2 numerical, 3 validation.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Parse { .. }
            | Error::ManifestMismatch(_)
            | Error::Manifest(_)
            | Error::EmptyPanel(_)
            | Error::EmptyIntersection(_)
            | Error::InvalidInput(_)
            | Error::Io { .. }
            | Error::Json(_)
            | Error::Csv(_) => 1,
            Error::Degenerate(_) | Error::Separation { .. } | Error::Singular(_) => 2,
            Error::ScreeningFailed { .. } | Error::Consistency(_) | Error::Inconsistent(_) => 3,
        }
    }
}

use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("schema: {0}")]
    Schema(String),

    #[error("csv: {0}")]
    Csv(String),

    /// A preprocessing step rejected its input. `step` names the pipeline stage.
    #[error("{step}: {message}")]
    Preprocess { step: &'static str, message: String },

    #[error("shape mismatch in {op}: {left:?} vs {right:?}")]
    Shape {
        op: &'static str,
        left: (usize, usize),
        right: (usize, usize),
    },

    #[error("index {index} out of range for embedding '{table}' with {rows} rows")]
    IndexOutOfRange { table: String, index: u32, rows: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("non-finite value: {0}")]
    NonFinite(String),

    #[error("layout mismatch: {0}")]
    LayoutMismatch(String),

    #[error("format: {0}")]
    Format(String),

    #[error("checksum mismatch (stored {stored:08x}, computed {computed:08x}); file is truncated or corrupt")]
    Checksum { stored: u32, computed: u32 },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }

    /// True when the failure is numerical (diverged training, non-finite gradients)
    /// rather than a problem with the inputs.
    pub fn is_numerical(&self) -> bool {
        matches!(self, Error::NonFinite(_))
    }
}

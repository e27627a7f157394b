use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = VlxError> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum VlxError {
    #[error("dimension mismatch in {op}: {lhs:?} vs {rhs:?}")]
    Dimension {
        op: &'static str,
        lhs: Vec<usize>,
        rhs: Vec<usize>,
    },

    #[error("degenerate embedding: row norm {norm:e} below {eps:e}")]
    DegenerateEmbedding { norm: f64, eps: f64 },

    #[error("non-finite value produced by {0}")]
    NonFinite(String),

    #[error("contract violation: {0}")]
    Contract(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("invalid parameter: {0}")]
    Parameter(String),

    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("unknown method `{0}`")]
    UnknownMethod(String),

    #[error("unsupported format in {path}: {reason}")]
    Format { path: String, reason: String },

    #[error("stale map stack: built with model {stack}, queried with {model}")]
    Staleness { stack: String, model: String },

    #[error("training diverged at epoch {epoch}, batch {batch} (lr {lr}): loss {loss}")]
    Diverged {
        epoch: usize,
        batch: usize,
        lr: f64,
        loss: f64,
    },

    #[error("dimension {dim}: {source}")]
    AtDimension {
        dim: usize,
        #[source]
        source: Box<VlxError>,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl VlxError {
    /// Stable machine-readable code used by the command-line error protocol.
    pub fn code(&self) -> &'static str {
        match self {
            VlxError::Dimension { .. } => "E_DIM",
            VlxError::DegenerateEmbedding { .. } => "E_DEGENERATE",
            VlxError::NonFinite(_) => "E_NONFINITE",
            VlxError::Contract(_) => "E_CONTRACT",
            VlxError::Input(_) => "E_INPUT",
            VlxError::Parameter(_) => "E_PARAM",
            VlxError::Config(_) => "E_CONFIG",
            VlxError::UnknownMethod(_) => "E_METHOD",
            VlxError::Format { .. } => "E_FORMAT",
            VlxError::Staleness { .. } => "E_STALE",
            VlxError::Diverged { .. } => "E_DIVERGED",
            VlxError::AtDimension { source, .. } => source.code(),
            VlxError::Io { .. } => "E_IO",
            VlxError::Json(_) => "E_JSON",
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        VlxError::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<String>, reason: impl Into<String>) -> Self {
        VlxError::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }
}

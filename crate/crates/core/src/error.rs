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

    #[error("line {line}: malformed OBJ directive: {message}")]
    MalformedObj { line: usize, message: String },

    #[error("line {line}: face references undefined vertex {index} (have {count})")]
    UndefinedVertex {
        line: usize,
        index: i64,
        count: usize,
    },

    #[error("line {line}: degenerate face (repeated vertex index)")]
    DegenerateFace { line: usize },

    #[error("mesh has no part groups; a segmented model is required")]
    Unsegmented,

    #[error("invalid mesh: {0}")]
    InvalidMesh(String),

    #[error("empty input: {0}")]
    Empty(String),

    #[error("degenerate geometry: {0}")]
    Degenerate(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("mismatch: {0}")]
    Mismatch(String),

    #[error("missing artifact {path}; run `{stage}` first")]
    MissingArtifact { path: PathBuf, stage: &'static str },

    #[error("image codec: {0}")]
    Image(String),

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

    /// Process exit code for this error: 2 for empty or invalid inputs,
    /// 3 for degenerate geometry.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Degenerate(_) => 3,
            _ => 2,
        }
    }
}

use std::path::PathBuf;

use dqpipe_core::ArtifactKind;

#[derive(Debug, thiserror::Error)]
pub enum Error {
    #[error(transparent)]
    Core(#[from] dqpipe_core::Error),
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed record at line {line}: {reason}")]
    MalformedRecord { line: usize, reason: String },
    #[error("bad request: {0}")]
    BadRequest(String),
    #[error("{kind} version {version} not found")]
    NotFound { kind: ArtifactKind, version: u64 },
    #[error("no {0} artifact registered")]
    NoArtifact(ArtifactKind),
    #[error("storage failure: {0}")]
    StorageFailure(String),
    #[error("store at {0} is locked by another writer")]
    Locked(PathBuf),
    #[error("insufficient baseline: {0}")]
    InsufficientBaseline(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>) -> impl FnOnce(std::io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

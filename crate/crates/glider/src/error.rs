use std::io;
use std::path::PathBuf;

use glider_core::bench::BenchError;
use glider_core::crossing::CrossError;
use glider_core::detect::DetectError;
use glider_core::perturb::PerturbError;
use glider_core::QueryError;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("usage: {0}")]
    Usage(String),
    #[error("io: {}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("json: {}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("csv: {}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("input: {0}")]
    Format(String),
    #[error("model: {0}")]
    Query(#[from] QueryError),
    #[error("detect: {0}")]
    Detect(#[from] DetectError),
    #[error("bench: {0}")]
    Bench(#[from] BenchError),
    #[error("cross: {0}")]
    Cross(#[from] CrossError),
    #[error("perturb: {0}")]
    Perturb(#[from] PerturbError),
}

impl Error {
    /// 2 for usage errors, 1 for everything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Usage(_) => 2,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>) -> impl FnOnce(io::Error) -> Self {
        let path = path.into();
        move |source| Error::Io { path, source }
    }
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

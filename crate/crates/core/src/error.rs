use std::path::PathBuf;

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    #[error("parameter out of domain: {0}")]
    Domain(String),

    #[error("simulation diverged (seed {seed}) at t = {time:.1} s: {reason}")]
    Divergence { seed: u64, time: f64, reason: String },

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("degenerate data: {0}")]
    Degenerate(String),

    #[error(
        "regression fit failed: design matrix rank-deficient (condition estimate {condition:.3e}) for output {output}"
    )]
    RankDeficient { output: usize, condition: f64 },

    #[error("not enough episodes ({available}) for {required} non-empty splits")]
    TooFewEpisodes { available: usize, required: usize },

    #[error("training aborted: {0}")]
    TrainingDiverged(String),

    #[error("checkpoint version mismatch: expected {expected}, found {found}")]
    Version { expected: String, found: String },

    #[error("format error in {path}: {msg}")]
    Format { path: PathBuf, msg: String },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, msg: impl Into<String>) -> Self {
        Error::Format { path: path.into(), msg: msg.into() }
    }
}

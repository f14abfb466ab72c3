use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

/// Failure modes of the learner, grouped so that the CLI can map them onto
/// process exit codes.
#[derive(Debug, Error)]
pub enum Error {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("numerical error in {op}: {detail}")]
    Numerical { op: String, detail: String },

    #[error("domain error: {0}")]
    Domain(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("episode exhausted: step {t} is already at the horizon {horizon}")]
    EpisodeExhausted { t: usize, horizon: usize },

    #[error("demo generation failed: {0}")]
    Generation(String),

    #[error("checkpoint format version {found} is newer than supported version {supported}")]
    CheckpointVersion { found: u32, supported: u32 },

    #[error("checkpoint truncated: expected {expected} bytes, found {found}")]
    CheckpointTruncated { expected: u64, found: u64 },

    #[error("checkpoint checksum mismatch")]
    CheckpointChecksum,

    #[error("not a checkpoint file (bad magic)")]
    CheckpointMagic,

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("serialization error: {0}")]
    Serde(String),
}

impl Error {
    pub fn config(msg: impl Into<String>) -> Self {
        Error::Config(msg.into())
    }

    pub fn numerical(op: impl Into<String>, detail: impl Into<String>) -> Self {
        Error::Numerical {
            op: op.into(),
            detail: detail.into(),
        }
    }

    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// Process exit code: 2 config, 3 numerical, 4 I/O.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Numerical { .. } => 3,
            Error::Io { .. }
            | Error::Serde(_)
            | Error::CheckpointVersion { .. }
            | Error::CheckpointTruncated { .. }
            | Error::CheckpointChecksum
            | Error::CheckpointMagic => 4,
            Error::Config(_)
            | Error::Domain(_)
            | Error::Input(_)
            | Error::EpisodeExhausted { .. }
            | Error::Generation(_) => 2,
        }
    }
}

/// Returns `value` if finite, otherwise a numerical error naming `op`.
pub(crate) fn ensure_finite(op: &str, value: f64) -> Result<f64> {
    if value.is_finite() {
        Ok(value)
    } else {
        Err(Error::numerical(op, format!("non-finite value {value}")))
    }
}

pub(crate) fn ensure_all_finite(op: &str, values: &[f64]) -> Result<()> {
    match values.iter().position(|v| !v.is_finite()) {
        None => Ok(()),
        Some(i) => Err(Error::numerical(
            op,
            format!("non-finite entry {} at index {i}", values[i]),
        )),
    }
}

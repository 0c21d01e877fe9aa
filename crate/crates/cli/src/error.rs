use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = CliError> = std::result::Result<T, E>;

/// Why a checkpoint file was rejected.
#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum CheckpointError {
    #[error("bad magic bytes {0:?}")]
    BadMagic([u8; 4]),

    #[error("unsupported format version {0}")]
    UnsupportedVersion(u32),

    #[error("CRC mismatch (stored {stored:#010x}, computed {computed:#010x})")]
    CrcMismatch { stored: u32, computed: u32 },

    #[error("file ends inside {0}")]
    Truncated(&'static str),

    /// Well-formed container whose blocks do not describe the expected model.
    #[error("{0}")]
    Malformed(String),
}

impl CheckpointError {
    pub fn exit_code(&self) -> u8 {
        match self {
            CheckpointError::BadMagic(_) => 10,
            CheckpointError::UnsupportedVersion(_) => 11,
            CheckpointError::CrcMismatch { .. } => 12,
            CheckpointError::Truncated(_) => 13,
            CheckpointError::Malformed(_) => 14,
        }
    }
}

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Core(#[from] atlas_core::Error),

    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: std::io::Error },

    #[error("{}:{line}: {message}", path.display())]
    Parse { path: PathBuf, line: usize, message: String },

    /// Every problem found in a config, in key order.
    #[error("invalid config:\n  {}", .0.join("\n  "))]
    Config(Vec<String>),

    #[error("checkpoint {}: {kind}", path.display())]
    Checkpoint { path: PathBuf, kind: CheckpointError },

    /// A command was run before the artifacts it depends on exist.
    #[error("{0}")]
    State(String),

    #[error("{0}")]
    Usage(String),
}

impl CliError {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        CliError::Io { path: path.into(), source }
    }

    /// Process exit status for this error. Checkpoint failures get one code
    /// per kind so scripts can tell corruption from version skew.
    pub fn exit_code(&self) -> u8 {
        match self {
            CliError::Core(_) => 1,
            CliError::Usage(_) => 2,
            CliError::Config(_) => 3,
            CliError::Io { .. } => 4,
            CliError::Parse { .. } => 5,
            CliError::State(_) => 6,
            CliError::Checkpoint { kind, .. } => kind.exit_code(),
        }
    }
}

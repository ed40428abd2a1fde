//! Command-line front end: configuration, WAV and manifest I/O, and the
//! corpus, training, enhancement, evaluation and benchmark commands.

pub mod commands;
pub mod config;
pub mod manifest;
pub mod wav;

use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

pub use commands::*;
pub use config::{CodecParams, CorpusParams, EnhancerParams, Mode, RunConfig, Split, Task, SEED_ENV};
pub use manifest::{Entry, Manifest};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{}: {source}", path.display())]
    Wav {
        path: PathBuf,
        #[source]
        source: hound::Error,
    },

    #[error("data error: {0}")]
    Data(String),

    #[error(transparent)]
    Core(#[from] paragse::Error),
}

impl CliError {
    pub fn io(path: &Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.to_path_buf(),
            source,
        }
    }

    pub fn wav(path: &Path, source: hound::Error) -> Self {
        Self::Wav {
            path: path.to_path_buf(),
            source,
        }
    }

    /// 2 for configuration problems, 4 for numeric divergence, 3 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            Self::Config(_) | Self::Core(paragse::Error::Config(_)) => 2,
            Self::Core(paragse::Error::Divergence { .. }) => 4,
            Self::Core(paragse::Error::Pipeline { source, .. }) if matches!(**source, paragse::Error::Divergence { .. }) => 4,
            _ => 3,
        }
    }
}

/// SHA-256 of a file's bytes, hex encoded.
pub fn file_checksum(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

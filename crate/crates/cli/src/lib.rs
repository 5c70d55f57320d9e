//! Command implementations behind the `rltlab` binary.

pub mod commands;
pub mod config;
pub mod plot;
pub mod report;

use std::io::{BufReader, Write};
use std::path::Path;

use thiserror::Error;

pub use config::ExperimentConfig;

#[derive(Debug, Error)]
pub enum HarnessError {
    /// Bad configuration or missing inputs, detected before any compute.
    #[error("invalid configuration: {0}")]
    Validation(String),
    #[error("{0}")]
    Runtime(String),
}

impl HarnessError {
    pub fn exit_code(&self) -> i32 {
        match self {
            HarnessError::Validation(_) => 2,
            HarnessError::Runtime(_) => 1,
        }
    }
}

pub(crate) fn runtime(context: impl std::fmt::Display, err: impl std::fmt::Display) -> HarnessError {
    HarnessError::Runtime(format!("{context}: {err}"))
}

pub(crate) fn open(path: &Path) -> Result<BufReader<std::fs::File>, HarnessError> {
    std::fs::File::open(path)
        .map(BufReader::new)
        .map_err(|e| runtime(path.display(), e))
}

/// Writes via a temporary file in the target directory and a rename, so
/// readers never see a partial file.
pub fn write_atomic(path: &Path, contents: &str) -> Result<(), HarnessError> {
    let dir = path
        .parent()
        .ok_or_else(|| HarnessError::Runtime(format!("{}: no parent directory", path.display())))?;
    std::fs::create_dir_all(dir).map_err(|e| runtime(dir.display(), e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| runtime(dir.display(), e))?;
    tmp.write_all(contents.as_bytes()).map_err(|e| runtime(path.display(), e))?;
    let file = tmp.persist(path).map_err(|e| runtime(path.display(), e.error))?;
    #[cfg(unix)]
    {
        use std::os::unix::fs::PermissionsExt;
        file.set_permissions(std::fs::Permissions::from_mode(0o644))
            .map_err(|e| runtime(path.display(), e))?;
    }
    drop(file);
    log::info!("wrote {}", path.display());
    Ok(())
}

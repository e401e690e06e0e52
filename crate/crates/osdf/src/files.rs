use std::fs;
use std::io;
use std::path::Path;

use osdf_core::network::ValidationError;
use osdf_core::sim::ScriptStep;
use osdf_core::store::FormatError;
use osdf_core::{ApplicationRegistry, ConfigSpec, NetworkConfig, PolicyStore};

#[derive(Debug, thiserror::Error)]
pub enum FileError {
    #[error("{path}: {source}")]
    Io { path: String, source: io::Error },
    #[error("{path}: {source}")]
    Json { path: String, source: serde_json::Error },
    #[error("{path}: {source}")]
    Config { path: String, source: ValidationError },
    #[error("{path}: {source}")]
    Store { path: String, source: FormatError },
}

fn read(path: &Path) -> Result<String, FileError> {
    fs::read_to_string(path).map_err(|source| FileError::Io { path: path.display().to_string(), source })
}

pub fn load_config(path: &Path) -> Result<NetworkConfig, FileError> {
    let text = read(path)?;
    let spec: ConfigSpec =
        serde_json::from_str(&text).map_err(|source| FileError::Json { path: path.display().to_string(), source })?;
    NetworkConfig::from_spec(&spec).map_err(|source| FileError::Config { path: path.display().to_string(), source })
}

/// A missing file is an empty store, so the first `policy add` creates it.
pub fn load_store(path: &Path, registry: &ApplicationRegistry) -> Result<PolicyStore, FileError> {
    let text = match fs::read_to_string(path) {
        Ok(text) => text,
        Err(e) if e.kind() == io::ErrorKind::NotFound => return Ok(PolicyStore::new()),
        Err(source) => return Err(FileError::Io { path: path.display().to_string(), source }),
    };
    PolicyStore::from_text(&text, registry)
        .map_err(|source| FileError::Store { path: path.display().to_string(), source })
}

/// Writes through a sibling temp file and a rename, so readers never see a
/// half-written store.
pub fn save_store(path: &Path, store: &PolicyStore) -> Result<(), FileError> {
    let io_err = |source| FileError::Io { path: path.display().to_string(), source };
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    fs::write(&tmp, store.to_text()).map_err(io_err)?;
    fs::rename(&tmp, path).map_err(io_err)
}

pub fn load_script(path: &Path) -> Result<Vec<ScriptStep>, FileError> {
    let text = read(path)?;
    serde_json::from_str(&text).map_err(|source| FileError::Json { path: path.display().to_string(), source })
}

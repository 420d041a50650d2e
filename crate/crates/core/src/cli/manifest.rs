use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::ReportError;
use crate::protocol::ExperimentConfig;

pub const MANIFEST_FILE: &str = "manifest.toml";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileDigest {
    /// Relative to the manifest's directory.
    pub path: String,
    pub sha256: String,
}

/// Record of one CLI run: what was configured, which seeds were used and
/// what was written.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool_version: String,
    pub command: String,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
    pub realization_seeds: Vec<u64>,
    pub files: Vec<FileDigest>,
    pub config: ExperimentConfig,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary sibling file and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<PathBuf, ReportError> {
        let path = dir.join(MANIFEST_FILE);
        let text = toml::to_string(self).map_err(|e| ReportError::Manifest(e.to_string()))?;
        write_atomic(&path, text.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| ReportError::Manifest(e.to_string()))
    }
}

/// Re-hashes every file listed in the manifest; the error names the first
/// file that is missing or altered.
pub fn verify_manifest(path: &Path) -> Result<RunManifest, ReportError> {
    let manifest = RunManifest::read(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    for f in &manifest.files {
        let bytes = std::fs::read(dir.join(&f.path))
            .map_err(|e| ReportError::Checksum { path: f.path.clone(), detail: e.to_string() })?;
        let actual = sha256_hex(&bytes);
        if actual != f.sha256 {
            return Err(ReportError::Checksum {
                path: f.path.clone(),
                detail: format!("expected {}, found {actual}", f.sha256),
            });
        }
    }
    Ok(manifest)
}

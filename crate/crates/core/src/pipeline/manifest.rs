use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CrowdingError, Result};

pub const MANIFEST_SCHEMA: &str = "crowding.manifest/1";

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
}

/// What a command read, what it wrote and with which parameters.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema: String,
    pub command: String,
    pub seed: u64,
    pub parameters: serde_json::Value,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
    pub errors: Vec<String>,
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| CrowdingError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

/// Digest with the path shown relative to `base` when possible, so manifests
/// do not depend on where the output directory lives.
pub fn digest(path: &Path, base: &Path) -> Result<FileDigest> {
    let shown = path.strip_prefix(base).unwrap_or(path);
    Ok(FileDigest {
        path: shown.to_string_lossy().replace('\\', "/"),
        sha256: sha256_file(path)?,
    })
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CrowdingError::io(dir, e))?;
    }
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).map_err(|e| CrowdingError::io(path, e))
}

pub fn manifest_path(out: &Path, command: &str) -> PathBuf {
    out.join(format!("{command}.manifest.json"))
}

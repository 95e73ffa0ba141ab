//! Run manifest: the effective configuration, the tool version and a size and
//! SHA-256 checksum for every emitted file.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::AppError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileEntry {
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Configuration text after command-line overrides.
    pub config: String,
    /// Additive entropy constant `−ln θ*`, so that the entropy starts at zero.
    pub entropy_constant: f64,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub files: Vec<FileEntry>,
}

pub const MANIFEST_NAME: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_entry(dir: &Path, rel: &Path) -> Result<FileEntry, AppError> {
    let path = dir.join(rel);
    let data = fs::read(&path).map_err(|source| AppError::Output { path, source })?;
    Ok(FileEntry {
        path: rel.to_path_buf(),
        bytes: data.len() as u64,
        sha256: sha256_hex(&data),
    })
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> Result<(), AppError> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).map_err(|e| AppError::Output {
            path: path.clone(),
            source: e.into(),
        })?;
        fs::write(&path, text).map_err(|source| AppError::Output { path, source })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digests() {
        assert_eq!(
            sha256_hex(b""),
            "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855"
        );
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }
}

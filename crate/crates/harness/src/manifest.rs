//! Per-run manifest listing every emitted file with its SHA-256.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{HarnessError, Result};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ResultBundle {
    /// Derived from the command and the echoed config, so reruns of the same
    /// configuration share it.
    pub run_id: String,
    pub command: String,
    pub config: String,
    pub files: Vec<FileEntry>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn file_entry(dir: &Path, relative: &str) -> Result<FileEntry> {
    let path = dir.join(relative);
    let bytes = std::fs::read(&path).map_err(|e| HarnessError::io(&path, e))?;
    Ok(FileEntry {
        path: relative.to_string(),
        sha256: sha256_hex(&bytes),
        bytes: bytes.len() as u64,
    })
}

impl ResultBundle {
    pub fn new(command: &str, config: &str, dir: &Path, files: &[String]) -> Result<Self> {
        let mut files = files.to_vec();
        files.sort();
        files.dedup();
        let entries = files.iter().map(|f| file_entry(dir, f)).collect::<Result<Vec<_>>>()?;
        Ok(Self {
            run_id: sha256_hex(format!("{command}\n{config}").as_bytes())[..16].to_string(),
            command: command.to_string(),
            config: config.to_string(),
            files: entries,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join(MANIFEST_NAME);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        std::fs::write(&path, text + "\n").map_err(|e| HarnessError::io(&path, e))
    }

    pub fn read(dir: &Path) -> Result<Self> {
        let path = dir.join(MANIFEST_NAME);
        let text = std::fs::read_to_string(&path).map_err(|e| HarnessError::io(&path, e))?;
        serde_json::from_str(&text).map_err(|e| HarnessError::format(&path, e))
    }

    /// Files whose current content no longer matches the recorded checksum.
    pub fn stale_files(&self, dir: &Path) -> Vec<String> {
        self.files
            .iter()
            .filter(|f| file_entry(dir, &f.path).map(|now| now != **f).unwrap_or(true))
            .map(|f| f.path.clone())
            .collect()
    }
}

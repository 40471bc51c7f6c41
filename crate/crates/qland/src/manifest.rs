//! Run manifests: resolved configuration plus digests of every output.

use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::error::{CliError, Result};
use crate::output::{file_digest, write_json, OutputDir};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub tool_version: String,
    pub master_seed: Option<u64>,
    /// The fully resolved command configuration.
    pub config: serde_json::Value,
    pub started_unix: u64,
    pub finished_unix: u64,
    /// Sorted by path.
    pub files: Vec<FileEntry>,
}

pub fn unix_now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

/// Digests of the listed files, sorted by path.
pub fn inventory(root: &Path, files: &[PathBuf]) -> Result<Vec<FileEntry>> {
    let mut entries = files
        .iter()
        .map(|rel| {
            let (sha256, bytes) = file_digest(&root.join(rel))?;
            Ok(FileEntry {
                path: rel.to_string_lossy().replace('\\', "/"),
                sha256,
                bytes,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    entries.sort_by(|a, b| a.path.cmp(&b.path));
    Ok(entries)
}

impl RunManifest {
    pub fn new<C: Serialize>(command: &str, master_seed: Option<u64>, config: &C, started_unix: u64, out: &OutputDir) -> Result<Self> {
        Ok(Self {
            command: command.to_owned(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            master_seed,
            config: serde_json::to_value(config)?,
            started_unix,
            finished_unix: unix_now(),
            files: inventory(out.root(), out.files())?,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join(MANIFEST_FILE);
        write_json(&path, self)?;
        Ok(path)
    }

    /// Accepts a manifest file or the directory holding one.
    pub fn read(path: &Path) -> Result<Self> {
        let path = if path.is_dir() {
            path.join(MANIFEST_FILE)
        } else {
            path.to_path_buf()
        };
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::io(&path, e))?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn config_as<T: serde::de::DeserializeOwned>(&self) -> Result<T> {
        Ok(serde_json::from_value(self.config.clone())?)
    }

    /// Paths whose digest differs between `self` and `other`, including
    /// files present in only one of them.
    pub fn differences(&self, other: &RunManifest) -> Vec<String> {
        let mut out = Vec::new();
        for f in &self.files {
            match other.files.iter().find(|g| g.path == f.path) {
                Some(g) if g.sha256 == f.sha256 => {}
                _ => out.push(f.path.clone()),
            }
        }
        for g in &other.files {
            if !self.files.iter().any(|f| f.path == g.path) {
                out.push(g.path.clone());
            }
        }
        out
    }
}

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{CliError, RunConfig};
use crate::io::{hex, write_atomic};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the directory holding the manifest.
    pub path: PathBuf,
    pub bytes: u64,
    pub sha256: String,
}

/// Record of one command invocation, written last so that its presence
/// marks a completed run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config: RunConfig,
    pub artifacts: Vec<Artifact>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
    /// Command-specific summary.
    pub details: serde_json::Value,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex(&Sha256::digest(bytes))
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.to_path_buf(),
        source,
    }
}

impl RunManifest {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            artifacts: Vec::new(),
            timings: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    /// Digests the file at `dir/rel` and lists it.
    pub fn record(&mut self, dir: &Path, rel: impl Into<PathBuf>) -> Result<(), CliError> {
        let rel = rel.into();
        let full = dir.join(&rel);
        let bytes = std::fs::read(&full).map_err(io_err(&full))?;
        self.artifacts.push(Artifact {
            path: rel,
            bytes: bytes.len() as u64,
            sha256: sha256_hex(&bytes),
        });
        Ok(())
    }

    pub fn artifact(&self, rel: &str) -> Option<&Artifact> {
        self.artifacts.iter().find(|a| a.path == Path::new(rel))
    }

    pub fn write(&self, path: &Path) -> Result<(), CliError> {
        let text = serde_json::to_string_pretty(self).expect("manifest serializes") + "\n";
        write_atomic(path, text.as_bytes()).map_err(io_err(path))
    }

    pub fn read(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(io_err(path))?;
        serde_json::from_str(&text).map_err(|e| CliError::Config {
            path: path.display().to_string(),
            reason: e.to_string(),
        })
    }

    /// Artifacts under `dir` whose current digest differs from the record.
    pub fn stale_artifacts(&self, dir: &Path) -> Vec<PathBuf> {
        self.artifacts
            .iter()
            .filter(|a| {
                std::fs::read(dir.join(&a.path))
                    .map(|b| sha256_hex(&b) != a.sha256)
                    .unwrap_or(true)
            })
            .map(|a| a.path.clone())
            .collect()
    }
}

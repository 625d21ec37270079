//! Run manifests: every command records its resolved configuration, input
//! hashes, seed, and output paths beside its primary output, so any run can
//! be reproduced exactly from the manifest.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::CliError;

#[derive(Serialize)]
pub struct RunManifest {
    pub command: String,
    /// All settings with defaults materialized.
    pub config: serde_json::Value,
    /// sha256 of each input file consumed.
    pub input_hashes: BTreeMap<String, String>,
    pub seed: u64,
    pub outputs: Vec<String>,
    /// Informational; not part of the reproducibility contract.
    pub created_utc: String,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.to_string(),
            config,
            input_hashes: BTreeMap::new(),
            seed,
            outputs: Vec::new(),
            created_utc: chrono::Utc::now().to_rfc3339(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let bytes = fs::read(path)?;
        let digest = Sha256::digest(&bytes);
        let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
        self.input_hashes
            .insert(path.display().to_string(), hex);
        Ok(())
    }

    pub fn record_output(&mut self, path: &Path) {
        self.outputs.push(path.display().to_string());
    }

    /// Writes `run-manifest.json` beside the primary output (or into the
    /// working directory when the command produced no files).
    pub fn write(&self, primary_output: Option<&Path>) -> Result<PathBuf, CliError> {
        let dir = primary_output
            .and_then(|p| p.parent())
            .filter(|p| !p.as_os_str().is_empty())
            .map(Path::to_path_buf)
            .unwrap_or_else(|| PathBuf::from("."));
        let path = dir.join("run-manifest.json");
        let body = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Internal(e.to_string()))?;
        fs::write(&path, body)?;
        Ok(path)
    }
}

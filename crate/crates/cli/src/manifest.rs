//! Run manifest written next to every output set.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Running,
    Ok,
    Error,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ErrorRecord {
    /// `schema`, `numerical` or `io`.
    pub kind: String,
    pub exit_code: i32,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileRecord {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub experiment: Option<String>,
    /// SHA-256 of the canonical (re-serialised) configuration.
    pub config_sha256: Option<String>,
    pub threads: usize,
    pub status: Status,
    pub wall_time_s: f64,
    pub files: Vec<FileRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub completed_points: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<ErrorRecord>,
}

impl Manifest {
    pub fn new(experiment: Option<&str>, config_sha256: Option<String>, threads: usize) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            experiment: experiment.map(str::to_string),
            config_sha256,
            threads,
            status: Status::Running,
            wall_time_s: 0.0,
            files: Vec::new(),
            completed_points: Vec::new(),
            error: None,
        }
    }

    pub fn from_json_str(text: &str) -> Result<Self, CliError> {
        serde_json::from_str(text).map_err(|e| CliError::Schema(format!("manifest: {e}")))
    }

    pub fn read(dir: &Path) -> Result<Option<Self>, CliError> {
        let path = dir.join(MANIFEST_FILE);
        if !path.exists() {
            return Ok(None);
        }
        let text = std::fs::read_to_string(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        Self::from_json_str(&text).map(Some)
    }

    pub fn write(&self, dir: &Path) -> Result<(), CliError> {
        let path = dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(self).expect("manifest serialises");
        std::fs::write(&path, text + "\n").map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
    }

    /// Record (or refresh) a file written into `dir`.
    pub fn record_file(&mut self, dir: &Path, name: &str) -> Result<(), CliError> {
        let path = dir.join(name);
        let data = std::fs::read(&path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let rec = FileRecord { path: name.to_string(), bytes: data.len() as u64, sha256: sha256_hex(&data) };
        match self.files.iter_mut().find(|f| f.path == name) {
            Some(f) => *f = rec,
            None => self.files.push(rec),
        }
        Ok(())
    }

    pub fn fail(&mut self, err: &CliError) {
        self.status = Status::Error;
        self.error = Some(err.record());
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex::encode(Sha256::digest(data))
}

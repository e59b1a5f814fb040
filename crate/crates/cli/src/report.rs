//! Run manifests, reports and the output directory.
//!
//! Reports carry no timestamps or absolute paths, so identical inputs give identical bytes.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::Command;
use crate::error::{CliError, CliResult};

pub const SCHEMA_VERSION: u32 = 1;
pub const TOOL_VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    /// Every key the command reads, fully resolved.
    pub config: BTreeMap<String, String>,
    /// SHA-256 of each input artifact, keyed by the config key naming it.
    pub input_hashes: BTreeMap<String, String>,
    pub tool_version: String,
    /// `exact` when every output is rational arithmetic, `numeric` otherwise.
    pub reproducibility: String,
}

impl RunManifest {
    pub fn new(command: Command, config: BTreeMap<String, String>, input_hashes: BTreeMap<String, String>) -> Self {
        RunManifest {
            schema_version: SCHEMA_VERSION,
            command: command.name().to_string(),
            config,
            input_hashes,
            tool_version: TOOL_VERSION.to_string(),
            reproducibility: if command.is_exact() { "exact" } else { "numeric" }.to_string(),
        }
    }

    /// Reads a manifest, or the manifest embedded in a report.
    pub fn load(path: &Path) -> CliResult<RunManifest> {
        let text = fs::read_to_string(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
        let value: serde_json::Value = serde_json::from_str(&text)?;
        let manifest = value.get("manifest").cloned().unwrap_or(value);
        let m: RunManifest = serde_json::from_value(manifest)?;
        if m.schema_version != SCHEMA_VERSION {
            return Err(CliError::Usage(format!("manifest schema {} not supported", m.schema_version)));
        }
        Ok(m)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Ok,
    /// Ran to completion but a configured tolerance was not met.
    CheckFailed,
    NumericalFailure,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Artifact {
    /// Relative to the output directory.
    pub path: String,
    pub role: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub status: Status,
    pub message: Option<String>,
    pub manifest: RunManifest,
    pub result: serde_json::Value,
    pub artifacts: Vec<Artifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> CliResult<String> {
    let bytes = fs::read(path).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))?;
    Ok(sha256_hex(&bytes))
}

pub struct OutputDir {
    root: PathBuf,
    artifacts: Vec<Artifact>,
}

impl OutputDir {
    pub fn create(root: &Path) -> CliResult<OutputDir> {
        fs::create_dir_all(root).map_err(|e| CliError::Io(format!("{}: {e}", root.display())))?;
        Ok(OutputDir { root: root.to_path_buf(), artifacts: Vec::new() })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, name: &str, role: &str, bytes: &[u8]) -> CliResult<String> {
        fs::write(self.root.join(name), bytes)?;
        self.artifacts.push(Artifact { path: name.to_string(), role: role.to_string(), sha256: sha256_hex(bytes) });
        Ok(name.to_string())
    }

    /// Writes `manifest.json` and `report.json`; returns the report.
    pub fn finish(
        self,
        manifest: RunManifest,
        status: Status,
        message: Option<String>,
        result: serde_json::Value,
    ) -> CliResult<Report> {
        let mut m = serde_json::to_vec_pretty(&manifest)?;
        m.push(b'\n');
        fs::write(self.root.join("manifest.json"), m)?;
        let report = Report {
            schema_version: SCHEMA_VERSION,
            command: manifest.command.clone(),
            tool_version: TOOL_VERSION.to_string(),
            status,
            message,
            manifest,
            result,
            artifacts: self.artifacts,
        };
        let mut bytes = serde_json::to_vec_pretty(&report)?;
        bytes.push(b'\n');
        fs::write(self.root.join("report.json"), bytes)?;
        Ok(report)
    }
}

//! Run manifests: what was run, with which configuration, and where the
//! results went.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::{io_err, CliError};

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: serde_json::Value,
    /// SHA-256 of the compact JSON of `config` with sorted keys.
    pub config_sha256: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_file: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub config_file_sha256: Option<String>,
    pub workers: usize,
    pub outputs: Vec<String>,
    pub created_unix: u64,
}

fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl Manifest {
    pub fn new<C: Serialize + ?Sized>(
        command: &str,
        config: &C,
        config_file: Option<&Path>,
        workers: usize,
        outputs: Vec<PathBuf>,
    ) -> Result<Self, CliError> {
        let config = serde_json::to_value(config).map_err(|e| CliError::Runtime(e.to_string()))?;
        let canonical = serde_json::to_string(&config).map_err(|e| CliError::Runtime(e.to_string()))?;
        let config_file_sha256 = match config_file {
            Some(p) => Some(sha256_hex(&fs::read(p).map_err(|e| io_err(p, e))?)),
            None => None,
        };
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        Ok(Self {
            tool: "batchbandit",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            config_sha256: sha256_hex(canonical.as_bytes()),
            config,
            config_file: config_file.map(|p| p.display().to_string()),
            config_file_sha256,
            workers,
            outputs: outputs.iter().map(|p| p.display().to_string()).collect(),
            created_unix,
        })
    }
}

//! Run manifests: everything needed to reproduce a run, plus content hashes
//! of the files it wrote.

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use wicksync::experiments::{ExperimentConfig, ExperimentKind};

use crate::ini::ConfigError;

/// How member seeds are derived from the base seed.
pub const SEED_RULE: &str =
    "member_seed(base, i) = first 8 bytes (little-endian u64) of SHA-256(base as u64 LE || i as u64 LE)";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    /// `sha256:` followed by the hex SHA-256 of `blob <len>\0<content>`.
    pub hash: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub version: String,
    pub kind: ExperimentKind,
    /// Fully resolved configuration; `run --config manifest.json` replays it.
    pub config_ini: String,
    pub config: ExperimentConfig,
    pub seed_base: u64,
    pub seed_rule: String,
    pub seeds: Vec<u64>,
    pub passed: bool,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub wall_seconds: f64,
    pub threads: usize,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn to_json(&self) -> Result<String, ConfigError> {
        serde_json::to_string_pretty(self)
            .map(|s| s + "\n")
            .map_err(|e| ConfigError { line: None, message: e.to_string() })
    }

    pub fn from_json(text: &str) -> Result<Self, ConfigError> {
        serde_json::from_str(text).map_err(|e| ConfigError {
            line: Some(e.line()),
            message: format!("invalid manifest: {e}"),
        })
    }
}

/// Git-style object hash of `bytes`, with SHA-256 as the digest.
pub fn content_hash(bytes: &[u8]) -> String {
    let mut hasher = Sha256::new();
    hasher.update(format!("blob {}\0", bytes.len()).as_bytes());
    hasher.update(bytes);
    format!("sha256:{}", hex::encode(hasher.finalize()))
}

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::{write_atomic, ReportError};
use crate::scoring::ScorerSpec;

pub const MANIFEST_VERSION: u32 = 1;

/// Everything needed to reproduce a run directory.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunManifest {
    pub version: u32,
    /// Content hash of the inputs below (timestamps excluded).
    pub run_id: String,
    /// Resolved configuration, as the CLI saw it after flag overrides.
    pub config: serde_json::Value,
    pub bank_checksum: String,
    pub seed: u64,
    pub scorers: Vec<ScorerSpec>,
    /// Seconds since the Unix epoch.
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(config: serde_json::Value, bank_checksum: String, seed: u64, scorers: Vec<ScorerSpec>) -> Self {
        let mut m = RunManifest {
            version: MANIFEST_VERSION,
            run_id: String::new(),
            config,
            bank_checksum,
            seed,
            scorers,
            created_unix: source_date_epoch().unwrap_or_else(now_unix),
        };
        m.run_id = m.content_id();
        m
    }

    /// First 16 hex digits of SHA-256 over the reproducibility inputs.
    pub fn content_id(&self) -> String {
        let inputs = serde_json::json!({
            "version": self.version,
            "config": self.config,
            "bank_checksum": self.bank_checksum,
            "seed": self.seed,
            "scorers": self.scorers,
        });
        let digest = Sha256::digest(serde_json::to_vec(&inputs).expect("manifest serializes"));
        hex::encode(&digest[..8])
    }

    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("manifest serializes");
        s.push('\n');
        s
    }

    pub fn write(&self, path: &Path) -> Result<(), ReportError> {
        write_atomic(path, self.to_json().as_bytes())
    }

    pub fn read(path: &Path) -> Result<Self, ReportError> {
        let text = std::fs::read_to_string(path).map_err(|e| ReportError::io(path, e))?;
        serde_json::from_str(&text).map_err(|source| ReportError::Json {
            path: path.to_path_buf(),
            line: source.line(),
            source,
        })
    }
}

/// `SOURCE_DATE_EPOCH`, when set to an integer.
pub fn source_date_epoch() -> Option<u64> {
    std::env::var("SOURCE_DATE_EPOCH").ok()?.trim().parse().ok()
}

fn now_unix() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0)
}

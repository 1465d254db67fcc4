//! Run manifest: the last artifact written, and therefore the success marker.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use d2d_core::config::RunConfig;
use d2d_core::gateway::GatewayMode;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "outcome", rename_all = "snake_case")]
pub enum RunStatus {
    Success,
    Error { stage: String, message: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    /// Wall-clock seconds since the epoch plus a config-hash suffix; unique
    /// enough to tell runs apart, not used for any content decision.
    pub run_id: String,
    pub status: RunStatus,
    pub config: RunConfig,
    pub input: InputRecord,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub knowledge_path: Option<PathBuf>,
    /// Content digest over the run's semantic inputs (config minus transport
    /// routing and output location, input bytes, knowledge bytes). Identical
    /// for record and replay of the same session; stamped into the dashboard.
    pub run_digest: String,
    /// Relative artifact path → SHA-256 of its bytes, in path order.
    pub artifacts: BTreeMap<String, String>,
    pub timings_ms: BTreeMap<String, u64>,
    pub warnings: Vec<String>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Digest of what determines run *content*. Mode, cassette location, and
/// output directory route bytes around without changing them, so they are
/// normalized out; everything else in the config participates.
pub fn run_digest(config: &RunConfig, input_bytes: &[u8], knowledge_bytes: Option<&[u8]>) -> String {
    let mut canon = config.clone();
    canon.mode = GatewayMode::Replay;
    canon.cassette_path = None;
    canon.output_dir = PathBuf::new();
    let mut h = Sha256::new();
    h.update(serde_json::to_vec(&canon).expect("config serializes"));
    h.update([0u8]);
    h.update(input_bytes);
    h.update([0u8]);
    if let Some(kb) = knowledge_bytes {
        h.update(kb);
    }
    hex::encode(h.finalize())
}

pub fn write_manifest(run_dir: &Path, manifest: &RunManifest) -> std::io::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(manifest).expect("manifest serializes");
    bytes.push(b'\n');
    std::fs::write(run_dir.join(MANIFEST_FILE), bytes)
}

pub fn read_manifest(run_dir: &Path) -> Result<RunManifest, crate::CliError> {
    let path = run_dir.join(MANIFEST_FILE);
    let bytes = std::fs::read(&path).map_err(|e| crate::CliError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })?;
    serde_json::from_slice(&bytes).map_err(|e| crate::CliError::Artifact {
        path: path.display().to_string(),
        message: e.to_string(),
    })
}

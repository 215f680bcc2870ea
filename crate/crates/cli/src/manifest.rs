//! Run manifest: what each stage read, wrote and how long it took.

use serde::{Deserialize, Serialize};
use std::collections::BTreeMap;
use std::path::Path;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const MANIFEST_FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum StageStatus {
    Ok,
    Failed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DataFile {
    /// `builtin` or the path the file was read from.
    pub source: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub version: Option<String>,
    pub digest: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageRecord {
    pub seed: u64,
    /// Digest of the settings and data files this stage and its upstream
    /// stages read.
    #[serde(default)]
    pub fingerprint: String,
    pub status: StageStatus,
    /// Output path relative to the run directory → SHA-256.
    pub outputs: BTreeMap<String, String>,
    pub duration_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
    /// Small stage-specific facts (row counts, chosen K, ...).
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub notes: BTreeMap<String, String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub format_version: u32,
    pub tool_version: String,
    pub config_digest: String,
    pub seed: u64,
    pub data_files: BTreeMap<String, DataFile>,
    pub stages: BTreeMap<String, StageRecord>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub failed_stage: Option<String>,
}

impl RunManifest {
    pub fn new(config_digest: String, seed: u64) -> Self {
        Self {
            format_version: MANIFEST_FORMAT_VERSION,
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            config_digest,
            seed,
            data_files: BTreeMap::new(),
            stages: BTreeMap::new(),
            failed_stage: None,
        }
    }

    pub fn load(path: &Path) -> Result<Self, String> {
        let text = std::fs::read_to_string(path).map_err(|e| format!("cannot read {}: {e}", path.display()))?;
        serde_json::from_str(&text).map_err(|e| format!("malformed manifest {}: {e}", path.display()))
    }

    pub fn save(&self, path: &Path) -> std::io::Result<()> {
        let mut text = serde_json::to_string_pretty(self).expect("manifest serializes");
        text.push('\n');
        std::fs::write(path, text)
    }

    /// Every recorded output digest keyed by `stage/path`, plus the config
    /// and data-file digests. Timings are excluded.
    pub fn digests(&self) -> BTreeMap<String, String> {
        let mut out = BTreeMap::new();
        out.insert("config".to_owned(), self.config_digest.clone());
        for (name, f) in &self.data_files {
            out.insert(format!("data:{name}"), f.digest.clone());
        }
        for rec in self.stages.values() {
            for (path, d) in &rec.outputs {
                out.insert(path.clone(), d.clone());
            }
        }
        out
    }

    pub fn succeeded(&self) -> bool {
        self.failed_stage.is_none() && self.stages.values().all(|s| s.status == StageStatus::Ok)
    }
}

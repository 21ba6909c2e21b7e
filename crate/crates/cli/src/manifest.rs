use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use stance_core::backend::BackendConfig;
use stance_core::chain::ChainMode;

use crate::data::FileDigest;
use crate::settings::RunSettings;

pub const MANIFEST_FILE: &str = "manifest.json";
pub const PARTIAL_MARKER: &str = "PARTIAL";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum RunStatus {
    Running,
    Complete,
    Partial,
}

/// Everything needed to reproduce one condition's run. Holds the name of
/// the API key variable, never its value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command_line: Vec<String>,
    pub config: RunSettings,
    pub mode: ChainMode,
    pub backend: BackendConfig,
    pub backend_digest: String,
    pub template_digest: String,
    pub dataset_digest: String,
    pub data_files: Vec<FileDigest>,
    /// Digest that ties score tables and traces to these inputs.
    pub config_digest: String,
    pub seeds: Vec<u64>,
    pub started_at: String,
    #[serde(default)]
    pub finished_at: Option<String>,
    pub status: RunStatus,
    /// Chain and direct requests that reached the backend.
    pub backend_calls: u64,
    pub cache_hits: u64,
    /// Error-audit requests, counted apart from the chain.
    #[serde(default)]
    pub audit_calls: u64,
    /// Paths relative to the run directory.
    pub artifacts: Vec<PathBuf>,
}

impl RunManifest {
    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        let path = dir.join(MANIFEST_FILE);
        std::fs::write(&path, text).with_context(|| path.display().to_string())
    }

    pub fn read(dir: &Path) -> anyhow::Result<RunManifest> {
        let path = dir.join(MANIFEST_FILE);
        let text = std::fs::read_to_string(&path).with_context(|| path.display().to_string())?;
        serde_json::from_str(&text).with_context(|| path.display().to_string())
    }
}

pub fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum Status {
    Complete,
    Partial,
}

/// Written next to every output set so a result directory can be traced back
/// to the exact configuration and seed that produced it.
#[derive(Debug, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub name: String,
    pub schema: &'static str,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub master_seed: Option<u64>,
    /// SHA-256 of the effective configuration after command-line overrides.
    pub spec_sha256: String,
    pub created_unix: u64,
    pub status: Status,
    pub cells_completed: usize,
    pub cells_total: usize,
    pub outputs: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Manifest {
    pub fn new(command: &str, name: &str, config_text: &str, master_seed: Option<u64>) -> Self {
        Manifest {
            tool: "jmpower",
            version: env!("CARGO_PKG_VERSION"),
            command: command.to_string(),
            name: name.to_string(),
            schema: jmpower_core::config::SCHEMA,
            master_seed,
            spec_sha256: sha256_hex(config_text.as_bytes()),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
            status: Status::Complete,
            cells_completed: 0,
            cells_total: 0,
            outputs: Vec::new(),
            error: None,
        }
    }

    pub fn write(&self, dir: &Path) -> anyhow::Result<()> {
        let text = toml::to_string(self)?;
        std::fs::write(dir.join("manifest.toml"), text)?;
        Ok(())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

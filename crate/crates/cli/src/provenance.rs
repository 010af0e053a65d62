use std::collections::BTreeMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use touchgrid::hashing::sha256_hex;
use touchgrid::ingest::sidecar_path;

use crate::error::CliResult;

/// Written into every artifact. Carries no timestamps so reruns are
/// byte-identical.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub tool_version: String,
    pub command: String,
    pub config_hash: String,
    /// Input role to SHA-256 of its bytes.
    pub inputs: BTreeMap<String, String>,
}

impl Provenance {
    pub fn new(command: &str, config_hash: &str) -> Self {
        Self {
            tool: "touchgrid".into(),
            tool_version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_hash: config_hash.into(),
            inputs: BTreeMap::new(),
        }
    }

    pub fn input(&mut self, role: &str, path: &Path) -> CliResult<()> {
        self.inputs.insert(role.to_string(), sha256_hex(&std::fs::read(path)?));
        if path.extension().is_some_and(|e| e == "fmx") {
            let side = sidecar_path(path);
            if side.exists() {
                self.inputs.insert(format!("{role}.sidecar"), sha256_hex(&std::fs::read(side)?));
            }
        }
        Ok(())
    }

    pub fn to_value(&self) -> serde_json::Value {
        serde_json::to_value(self).unwrap_or(serde_json::Value::Null)
    }
}

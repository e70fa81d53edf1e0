//! Run manifests: enough of the command, configuration, seeds and input
//! digests to reproduce a run exactly. The timestamp is informational and
//! is the one field that varies between otherwise identical runs.

use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde_json::json;

use crate::util::{input_digests, write_atomic, CliResult};

pub struct Manifest {
    pub command: &'static str,
    pub seed: u64,
    pub config: serde_json::Map<String, serde_json::Value>,
    pub inputs: Vec<(String, String)>,
}

impl Manifest {
    pub fn new(command: &'static str, seed: u64) -> Self {
        Manifest {
            command,
            seed,
            config: serde_json::Map::new(),
            inputs: Vec::new(),
        }
    }

    pub fn set(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.config.insert(key.to_string(), value.into());
    }

    pub fn add_input(&mut self, path: &Path) -> CliResult<()> {
        self.inputs.extend(input_digests(path)?);
        Ok(())
    }

    pub fn write(&self, path: &Path) -> CliResult<()> {
        let created = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        let inputs: Vec<serde_json::Value> = self
            .inputs
            .iter()
            .map(|(p, digest)| json!({ "path": p, "sha256": digest }))
            .collect();
        let doc = json!({
            "command": self.command,
            "tool_version": env!("CARGO_PKG_VERSION"),
            "seed": self.seed,
            "config": self.config,
            "inputs": inputs,
            "created_unix": created,
        });
        let mut text = serde_json::to_string_pretty(&doc)
            .expect("manifest serialization cannot fail");
        text.push('\n');
        write_atomic(path, text.as_bytes())
    }
}

//! Experiment manifest: the full provenance of a run. Every emitted
//! artifact embeds the manifest hash so outputs can be traced back to
//! the exact configuration, seeds and interpretation flags that
//! produced them.

use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::SimConfig;
use crate::Result;

/// Resolved readings of knobs the underlying method leaves open.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct InterpretationFlags {
    /// Whether dropout_p0 is a keep-probability (true) or a
    /// mask-probability.
    pub dropout_p0_is_keep: bool,
    /// Attention convention: false = neighbor queries against the self
    /// key.
    pub swap_query_key: bool,
    pub optimizer: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ExperimentManifest {
    pub code_version: String,
    pub command: String,
    pub config: SimConfig,
    pub seeds: Vec<u64>,
    pub episodes: Option<usize>,
    pub interpretation: InterpretationFlags,
    pub outputs: Vec<String>,
}

impl ExperimentManifest {
    pub fn new(command: &str, config: &SimConfig, seeds: Vec<u64>, episodes: Option<usize>) -> Self {
        Self {
            code_version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.to_string(),
            config: config.clone(),
            seeds,
            episodes,
            interpretation: InterpretationFlags {
                dropout_p0_is_keep: config.learning.dropout_p0_is_keep,
                swap_query_key: config.policy.swap_query_key,
                optimizer: config.learning.optimizer.clone(),
            },
            outputs: Vec::new(),
        }
    }

    /// SHA-256 of the canonical JSON encoding.
    pub fn hash(&self) -> String {
        let json = serde_json::to_vec(self).expect("manifest serializes");
        hex::encode(Sha256::digest(&json))
    }

    /// Writes the manifest JSON with its own hash embedded.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut value = serde_json::to_value(self).expect("manifest serializes");
        value["manifest_hash"] = serde_json::Value::String(self.hash());
        std::fs::write(path, serde_json::to_string_pretty(&value).unwrap())?;
        Ok(())
    }
}

use std::path::{Path, PathBuf};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{write_file, Result};

/// Record of one run, written as `manifest.json` beside its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub config_path: Option<PathBuf>,
    pub seed: u64,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    /// Hex SHA-256 over the tool version, subcommand, resolved settings and
    /// input file contents.
    pub version_hash: String,
    pub settings: serde_json::Value,
}

impl RunManifest {
    pub fn new(subcommand: &str, seed: u64, settings: serde_json::Value) -> RunManifest {
        RunManifest {
            subcommand: subcommand.to_string(),
            config_path: None,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            version_hash: String::new(),
            settings,
        }
    }

    pub fn input(&mut self, p: &Path) {
        self.inputs.push(p.to_path_buf());
    }

    pub fn output(&mut self, p: &Path) {
        self.outputs.push(p.to_path_buf());
    }

    pub fn write(mut self, dir: &Path) -> Result<()> {
        let mut h = Sha256::new();
        h.update(env!("CARGO_PKG_VERSION"));
        h.update(&self.subcommand);
        h.update(self.seed.to_le_bytes());
        h.update(self.settings.to_string());
        for p in &self.inputs {
            // Missing inputs were already reported by the subcommand.
            if let Ok(bytes) = std::fs::read(p) {
                h.update(&bytes);
            }
        }
        self.version_hash = h.finalize().iter().map(|b| format!("{b:02x}")).collect();
        let text = serde_json::to_string_pretty(&self).expect("serializable");
        write_file(&dir.join("manifest.json"), &text)
    }
}

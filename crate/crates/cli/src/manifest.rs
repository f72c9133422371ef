use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

/// Record of one command invocation, written next to its outputs.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub args: Vec<String>,
    pub config_digest: String,
    pub seed: u64,
    pub tool_version: String,
    pub started_unix: f64,
    pub finished_unix: f64,
    pub outputs: Vec<PathBuf>,
}

pub fn now_unix() -> f64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map(|d| d.as_secs_f64()).unwrap_or(0.0)
}

/// First 16 hex digits of the SHA-256 of `value` as JSON.
pub fn digest<T: Serialize>(value: &T) -> String {
    let json = serde_json::to_string(value).expect("config serializes");
    Sha256::digest(json.as_bytes()).iter().take(8).map(|b| format!("{b:02x}")).collect()
}

impl RunManifest {
    pub fn start<T: Serialize>(command: &str, config: &T, seed: u64) -> Self {
        RunManifest {
            command: command.to_string(),
            args: std::env::args().skip(1).collect(),
            config_digest: digest(config),
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now_unix(),
            finished_unix: 0.0,
            outputs: Vec::new(),
        }
    }

    pub fn file_name(&self) -> String {
        format!("{}-manifest.json", self.command)
    }

    /// Line identifying this manifest, for embedding in text outputs.
    pub fn reference(&self) -> String {
        format!("manifest={} config={}", self.file_name(), self.config_digest)
    }

    pub fn write_output(&mut self, dir: &Path, name: &str, contents: &str) -> Result<PathBuf> {
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(name);
        std::fs::write(&path, contents).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(path.clone());
        Ok(path)
    }

    pub fn finish(mut self, dir: &Path) -> Result<PathBuf> {
        self.finished_unix = now_unix();
        std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
        let path = dir.join(self.file_name());
        std::fs::write(&path, serde_json::to_string_pretty(&self)?)
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

//! Run manifests written next to every command's outputs.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use crate::commands::{CliError, CliResult};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub inputs: Vec<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_time_s: f64,
    pub throughput: Option<f64>,
}

impl RunManifest {
    pub fn new(command: &str, config: Value, seed: Option<u64>) -> Self {
        Self {
            command: command.to_string(),
            config,
            seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            wall_time_s: 0.0,
            throughput: None,
        }
    }

    pub fn finish(mut self, started: Instant, path: &Path) -> CliResult<()> {
        self.wall_time_s = started.elapsed().as_secs_f64();
        let json = serde_json::to_vec_pretty(&self).map_err(|e| CliError::Runtime(e.to_string()))?;
        std::fs::write(path, json).map_err(|e| CliError::Runtime(format!("{}: {e}", path.display())))
    }
}

/// `DIR/manifest.json` for directory outputs, `FILE.manifest.json` next to
/// file outputs.
pub fn manifest_path(output: &Path, is_dir: bool) -> PathBuf {
    if is_dir {
        output.join("manifest.json")
    } else {
        let mut name = output.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        output.with_file_name(name)
    }
}

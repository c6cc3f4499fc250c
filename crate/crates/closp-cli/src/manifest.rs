//! Run manifests: a JSON sidecar written by every command.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;

use closp::{Error, Result};

/// Everything needed to reproduce a command: what ran, with which
/// settings, over which files. `duration_seconds` is informational and
/// not part of any byte-for-byte comparison.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub seed: u64,
    pub config: Value,
    pub inputs: Vec<String>,
    pub outputs: Vec<String>,
    pub tool_version: String,
    pub duration_seconds: f64,
}

impl RunManifest {
    pub fn new(command: &str, seed: u64, config: Value) -> Self {
        RunManifest {
            command: command.to_owned(),
            seed,
            config,
            inputs: Vec::new(),
            outputs: Vec::new(),
            tool_version: env!("CARGO_PKG_VERSION").to_owned(),
            duration_seconds: 0.0,
        }
    }

    pub fn input(mut self, path: &Path) -> Self {
        self.inputs.push(path.display().to_string());
        self
    }

    pub fn output(mut self, path: &Path) -> Self {
        self.outputs.push(path.display().to_string());
        self
    }

    /// Stamps the elapsed time and writes the manifest next to `for_output`.
    pub fn write(mut self, for_output: &Path, started: Instant) -> Result<()> {
        self.duration_seconds = started.elapsed().as_secs_f64();
        let json = serde_json::to_string_pretty(&self)
            .map_err(|e| Error::Format(format!("manifest serialisation failed: {e}")))?;
        std::fs::write(manifest_path(for_output), json + "\n")?;
        Ok(())
    }
}

/// `dir/` gets `dir/manifest.json`; a file output gets a `.manifest.json`
/// suffix appended to its full name.
pub fn manifest_path(out: &Path) -> PathBuf {
    if out.is_dir() {
        return out.join("manifest.json");
    }
    let mut name = out
        .file_name()
        .map(|n| n.to_os_string())
        .unwrap_or_default();
    name.push(".manifest.json");
    out.with_file_name(name)
}

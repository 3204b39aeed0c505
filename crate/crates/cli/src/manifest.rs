use std::fs;
use std::path::{Path, PathBuf};
use std::time::Duration;

use anyhow::{Context, Result};
use serde::Serialize;

/// Everything needed to rerun a command and get the same CSV back.
#[derive(Debug, Serialize)]
pub struct RunManifest<P: Serialize> {
    pub subcommand: &'static str,
    pub tool_version: &'static str,
    pub base_seed: Option<u64>,
    pub parameters: P,
    pub outputs: Vec<PathBuf>,
    pub wall_clock_seconds: f64,
}

impl<P: Serialize> RunManifest<P> {
    pub fn new(subcommand: &'static str, base_seed: Option<u64>, parameters: P) -> Self {
        Self {
            subcommand,
            tool_version: env!("CARGO_PKG_VERSION"),
            base_seed,
            parameters,
            outputs: Vec::new(),
            wall_clock_seconds: 0.0,
        }
    }

    /// Writes `<output>.manifest.json` next to the first output.
    pub fn write(&mut self, output: &Path, elapsed: Duration) -> Result<PathBuf> {
        self.outputs = vec![output.to_path_buf()];
        self.wall_clock_seconds = elapsed.as_secs_f64();
        let path = manifest_path(output);
        let json = serde_json::to_string_pretty(self)?;
        fs::write(&path, json + "\n")
            .with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(path)
    }
}

pub fn manifest_path(output: &Path) -> PathBuf {
    let mut name = output.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

//! Run manifests written next to every artifact.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Duration;

use serde::Serialize;

use crate::formats::FORMAT_VERSION;
use crate::{io, Result};

pub const VERSION: &str = env!("CARGO_PKG_VERSION");

#[derive(Debug, Clone, Serialize)]
pub struct Manifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub format_version: u32,
    pub command: String,
    pub seed: Option<u64>,
    pub threads: usize,
    pub config: serde_json::Value,
    /// Input path → hex SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub outputs: Vec<String>,
    pub timings: BTreeMap<String, f64>,
    /// Command-specific results such as training history.
    pub details: serde_json::Value,
}

impl Manifest {
    pub fn new(command: &str, config: &impl Serialize, seed: Option<u64>, threads: usize) -> Self {
        Self {
            tool: "kesm",
            version: VERSION,
            format_version: FORMAT_VERSION,
            command: command.into(),
            seed,
            threads,
            config: serde_json::to_value(config).expect("config serializes"),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            timings: BTreeMap::new(),
            details: serde_json::Value::Null,
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.inputs.insert(path.display().to_string(), io::sha256_file(path)?);
        Ok(())
    }

    pub fn time(&mut self, stage: &str, elapsed: Duration) {
        self.timings.insert(stage.into(), elapsed.as_secs_f64());
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut out = serde_json::to_vec_pretty(self).expect("in-memory serialization");
        out.push(b'\n');
        out
    }
}

/// `<out>.manifest.json`.
pub fn manifest_path(out: &Path) -> PathBuf {
    let mut s = out.as_os_str().to_owned();
    s.push(".manifest.json");
    PathBuf::from(s)
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use oodkit::config::RunConfig;
use oodkit::Result;
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Serialize)]
pub struct FileEntry {
    pub path: String,
    pub bytes: u64,
    pub sha256: String,
}

impl FileEntry {
    pub fn hash(path: &Path, display: String) -> Result<Self> {
        let data = fs::read(path)?;
        Ok(Self {
            path: display,
            bytes: data.len() as u64,
            sha256: format!("{:x}", Sha256::digest(&data)),
        })
    }
}

/// Provenance record written next to every command's outputs. Timestamps
/// live here and nowhere else.
#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub config: RunConfig,
    pub seeds: BTreeMap<&'static str, u64>,
    pub inputs: Vec<FileEntry>,
    pub outputs: Vec<FileEntry>,
    pub started_unix_s: u64,
    pub finished_unix_s: u64,
}

pub fn now_unix() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map_or(0, |d| d.as_secs())
}

pub struct ManifestBuilder {
    command: String,
    config: RunConfig,
    seeds: BTreeMap<&'static str, u64>,
    inputs: Vec<PathBuf>,
    started: u64,
}

impl ManifestBuilder {
    pub fn new(command: &str, config: &RunConfig) -> Self {
        Self {
            command: command.into(),
            config: config.clone(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            started: now_unix(),
        }
    }

    pub fn seed(mut self, name: &'static str, value: u64) -> Self {
        self.seeds.insert(name, value);
        self
    }

    pub fn input(&mut self, path: impl Into<PathBuf>) {
        self.inputs.push(path.into());
    }

    /// Hashes inputs and the listed outputs under `out_dir`, then writes
    /// `manifest.json` there.
    pub fn write(self, out_dir: &Path, outputs: &[String]) -> Result<PathBuf> {
        let inputs = self
            .inputs
            .iter()
            .filter(|p| p.is_file())
            .map(|p| FileEntry::hash(p, p.display().to_string()))
            .collect::<Result<Vec<_>>>()?;
        let outputs = outputs
            .iter()
            .map(|name| FileEntry::hash(&out_dir.join(name), name.clone()))
            .collect::<Result<Vec<_>>>()?;
        let manifest = RunManifest {
            tool: "oodkit",
            version: env!("CARGO_PKG_VERSION"),
            command: self.command,
            config: self.config,
            seeds: self.seeds,
            inputs,
            outputs,
            started_unix_s: self.started,
            finished_unix_s: now_unix(),
        };
        let path = out_dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text)?;
        Ok(path)
    }
}

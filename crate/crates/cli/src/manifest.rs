//! Run manifest: what was run, on which inputs, producing which outputs.

use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    pub fn of(path: &Path) -> Result<Self> {
        let data = std::fs::read(path).with_context(|| format!("cannot read {}", path.display()))?;
        Ok(Self { path: path.to_path_buf(), sha256: sha256_hex(&data), bytes: data.len() as u64 })
    }
}

pub fn sha256_hex(data: &[u8]) -> String {
    Sha256::digest(data).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: String,
    pub argv: Vec<String>,
    /// Effective arguments after defaults and `--args-file` expansion.
    pub args: serde_json::Value,
    pub seed: Option<u64>,
    pub threads: usize,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub started_at: String,
    pub finished_at: String,
}

/// Collects inputs and outputs while a subcommand runs.
pub struct Recorder {
    manifest: RunManifest,
}

impl Recorder {
    pub fn new(command: &str, argv: Vec<String>, args: serde_json::Value, threads: usize) -> Self {
        Self {
            manifest: RunManifest {
                tool: env!("CARGO_PKG_NAME"),
                version: env!("CARGO_PKG_VERSION"),
                command: command.to_string(),
                argv,
                args,
                seed: None,
                threads,
                inputs: Vec::new(),
                outputs: Vec::new(),
                started_at: chrono::Utc::now().to_rfc3339(),
                finished_at: String::new(),
            },
        }
    }

    pub fn seed(&mut self, seed: u64) {
        self.manifest.seed = Some(seed);
    }

    pub fn input(&mut self, path: &Path) -> Result<()> {
        self.manifest.inputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<()> {
        self.manifest.outputs.push(FileDigest::of(path)?);
        Ok(())
    }

    pub fn finish(mut self, path: &Path) -> Result<RunManifest> {
        self.manifest.finished_at = chrono::Utc::now().to_rfc3339();
        let text = serde_json::to_string_pretty(&self.manifest)?;
        std::fs::write(path, text + "\n").with_context(|| format!("cannot write manifest {}", path.display()))?;
        Ok(self.manifest)
    }
}

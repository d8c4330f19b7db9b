//! Run bookkeeping: output writing, input digests and `manifest.json`.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl FileDigest {
    fn of(label: String, content: &[u8]) -> Self {
        let hash = Sha256::digest(content);
        let sha256 = hash.iter().map(|b| format!("{b:02x}")).collect();
        Self { path: label, sha256, bytes: content.len() as u64 }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<String>,
    pub seed: Option<u64>,
    pub versions: BTreeMap<String, String>,
    pub started_at: String,
    pub finished_at: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    pub warnings: Vec<String>,
}

/// An in-progress command run rooted at an output directory.
#[derive(Debug)]
pub struct Run {
    dir: PathBuf,
    command: String,
    config: Option<String>,
    seed: Option<u64>,
    started_at: String,
    inputs: Vec<FileDigest>,
    outputs: Vec<FileDigest>,
    warnings: Vec<String>,
}

impl Run {
    pub fn start(dir: &Path, command: &str, config: Option<&Path>) -> Result<Self> {
        fs::create_dir_all(dir).with_context(|| format!("creating output directory {}", dir.display()))?;
        let mut run = Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            config: config.map(|p| p.display().to_string()),
            seed: None,
            started_at: now(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            warnings: Vec::new(),
        };
        if let Some(c) = config {
            run.input(c)?;
        }
        Ok(run)
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    /// Records the digest of an input file.
    pub fn input(&mut self, path: &Path) -> Result<()> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        let label = path.display().to_string();
        if !self.inputs.iter().any(|d| d.path == label) {
            self.inputs.push(FileDigest::of(label, &bytes));
        }
        Ok(())
    }

    /// Writes `content` to `name` inside the output directory.
    pub fn write(&mut self, name: &str, content: &str) -> Result<PathBuf> {
        let path = self.dir.join(name);
        fs::write(&path, content).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.retain(|d| d.path != name);
        self.outputs.push(FileDigest::of(name.to_string(), content.as_bytes()));
        log::info!("wrote {}", path.display());
        Ok(path)
    }

    pub fn warn(&mut self, message: impl Into<String>) {
        let m = message.into();
        log::warn!("{m}");
        self.warnings.push(m);
    }

    pub fn outputs(&self) -> &[FileDigest] {
        &self.outputs
    }

    pub fn finish(self) -> Result<RunManifest> {
        let mut versions = BTreeMap::new();
        versions.insert("partbias".to_string(), env!("CARGO_PKG_VERSION").to_string());
        versions.insert("manifest_format".to_string(), "1".to_string());
        let manifest = RunManifest {
            command: self.command,
            config: self.config,
            seed: self.seed,
            versions,
            started_at: self.started_at,
            finished_at: now(),
            inputs: self.inputs,
            outputs: self.outputs,
            warnings: self.warnings,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let text = serde_json::to_string_pretty(&manifest)? + "\n";
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(manifest)
    }
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

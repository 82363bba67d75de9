//! Run manifests: the resolved configuration, its hash, input digests and
//! the files a command wrote.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::ExperimentConfig;

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

pub fn sha256_hex(data: &[u8]) -> String {
    hex(&Sha256::digest(data))
}

pub fn file_digest(path: &Path) -> anyhow::Result<String> {
    let data = std::fs::read(path).with_context(|| format!("reading {}", path.display()))?;
    Ok(sha256_hex(&data))
}

#[derive(Serialize)]
struct Versions {
    posprobe: &'static str,
    checkpoint_format: u32,
}

#[derive(Serialize)]
struct Manifest<'a> {
    command: &'a str,
    config_hash: String,
    seeds: &'a [u64],
    versions: Versions,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
    config: &'a ExperimentConfig,
}

/// Collects written files for one command and writes the manifest.
pub struct RunRecord {
    out: PathBuf,
    command: &'static str,
    inputs: BTreeMap<String, String>,
    outputs: Vec<String>,
}

impl RunRecord {
    pub fn new(out: &Path, command: &'static str) -> anyhow::Result<Self> {
        for sub in ["checkpoints", "reports", "tables", "figures"] {
            std::fs::create_dir_all(out.join(sub)).with_context(|| format!("creating {}", out.join(sub).display()))?;
        }
        Ok(RunRecord {
            out: out.to_path_buf(),
            command,
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
        })
    }

    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        self.inputs.insert(path.display().to_string(), file_digest(path)?);
        Ok(())
    }

    pub fn path(&self, rel: &str) -> PathBuf {
        self.out.join(rel)
    }

    /// Write `body` to `rel` under the output directory.
    pub fn write(&mut self, rel: &str, body: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let path = self.out.join(rel);
        std::fs::write(&path, body).with_context(|| format!("writing {}", path.display()))?;
        self.outputs.push(rel.to_string());
        Ok(path)
    }

    /// Record a file written by other code.
    pub fn written(&mut self, path: &Path) {
        let rel = path.strip_prefix(&self.out).unwrap_or(path);
        self.outputs.push(rel.display().to_string());
    }

    /// Write `manifest-<command>.json` and the resolved config next to it.
    pub fn finish(mut self, config: &ExperimentConfig) -> anyhow::Result<PathBuf> {
        let toml = config.to_toml()?;
        let config_rel = format!("config-{}.toml", self.command);
        std::fs::write(self.out.join(&config_rel), &toml)?;
        self.outputs.push(config_rel);
        self.outputs.sort();
        let manifest = Manifest {
            command: self.command,
            config_hash: sha256_hex(toml.as_bytes()),
            seeds: &config.seeds,
            versions: Versions {
                posprobe: env!("CARGO_PKG_VERSION"),
                checkpoint_format: posprobe_core::model::state::CHECKPOINT_VERSION,
            },
            inputs: self.inputs,
            outputs: self.outputs,
            config,
        };
        let path = self.out.join(format!("manifest-{}.json", self.command));
        let mut json = serde_json::to_string_pretty(&manifest)?;
        json.push('\n');
        std::fs::write(&path, json)?;
        Ok(path)
    }
}

//! Atomic file output and the run manifest.

use std::collections::BTreeMap;
use std::io::Write;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FileEntry {
    pub sha256: String,
    pub bytes: usize,
}

#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Full configuration of the latest invocation, as TOML.
    pub config: String,
    pub commands: Vec<String>,
    /// Keyed by path relative to the output directory.
    pub files: BTreeMap<String, FileEntry>,
    /// Per-run metadata keyed like `L8/FO`.
    pub runs: BTreeMap<String, serde_json::Value>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

/// Writes through a temporary sibling and renames it into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    std::fs::create_dir_all(dir).with_context(|| format!("creating {}", dir.display()))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).with_context(|| format!("temp file in {}", dir.display()))?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).with_context(|| format!("renaming into {}", path.display()))?;
    Ok(())
}

pub struct Output {
    root: PathBuf,
    manifest: Manifest,
}

impl Output {
    /// Opens `root`, keeping entries of an existing manifest.
    pub fn open(root: &Path, config_toml: String, command: &str) -> Result<Self> {
        std::fs::create_dir_all(root).with_context(|| format!("creating {}", root.display()))?;
        let path = root.join(MANIFEST);
        let mut manifest = if path.exists() {
            let text = std::fs::read_to_string(&path)?;
            serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?
        } else {
            Manifest::default()
        };
        manifest.tool = env!("CARGO_PKG_NAME").to_string();
        manifest.version = env!("CARGO_PKG_VERSION").to_string();
        manifest.config = config_toml;
        manifest.commands.push(command.to_string());
        Ok(Output { root: root.to_path_buf(), manifest })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn write(&mut self, rel: &str, bytes: &[u8]) -> Result<()> {
        write_atomic(&self.root.join(rel), bytes)?;
        self.manifest
            .files
            .insert(rel.to_string(), FileEntry { sha256: sha256_hex(bytes), bytes: bytes.len() });
        Ok(())
    }

    pub fn run(&self, key: &str) -> Option<&serde_json::Value> {
        self.manifest.runs.get(key)
    }

    pub fn record(&mut self, key: &str, value: serde_json::Value) {
        match self.manifest.runs.get_mut(key) {
            Some(serde_json::Value::Object(old)) => {
                if let serde_json::Value::Object(new) = value {
                    old.extend(new);
                }
            }
            _ => {
                self.manifest.runs.insert(key.to_string(), value);
            }
        }
    }

    pub fn finish(self) -> Result<()> {
        let text = serde_json::to_string_pretty(&self.manifest)? + "\n";
        write_atomic(&self.root.join(MANIFEST), text.as_bytes())
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use anyhow::{Context, Result};
use serde_json::{json, Value};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::Command;

pub const MANIFEST: &str = "manifest.json";

fn sha256_hex(bytes: &[u8]) -> String {
    format!("{:x}", Sha256::digest(bytes))
}

fn base_name(path: &Path) -> String {
    path.file_name()
        .map_or_else(|| path.display().to_string(), |n| n.to_string_lossy().into_owned())
}

/// Tracks what one command read and wrote, then records it under the
/// command's name in `manifest.json`. Entries from other commands that share
/// the output directory are kept.
pub struct Artifacts {
    out_dir: PathBuf,
    inputs: BTreeMap<String, String>,
    written: BTreeMap<String, String>,
}

impl Artifacts {
    pub fn new(out_dir: &Path) -> Result<Self> {
        fs::create_dir_all(out_dir).with_context(|| format!("creating {}", out_dir.display()))?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            inputs: BTreeMap::new(),
            written: BTreeMap::new(),
        })
    }

    /// Read an input file and record its hash.
    pub fn read_input(&mut self, path: &Path) -> Result<Vec<u8>> {
        let bytes = fs::read(path).with_context(|| format!("reading {}", path.display()))?;
        self.inputs.insert(base_name(path), sha256_hex(&bytes));
        Ok(bytes)
    }

    pub fn write(&mut self, name: &str, bytes: &[u8]) -> Result<()> {
        let path = self.out_dir.join(name);
        self.write_at(&path, bytes)
    }

    /// Write outside the usual layout; recorded by file name.
    pub fn write_at(&mut self, path: &Path, bytes: &[u8]) -> Result<()> {
        fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))?;
        self.written.insert(base_name(path), sha256_hex(bytes));
        eprintln!("wrote {}", path.display());
        Ok(())
    }

    pub fn write_json<T: serde::Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text.as_bytes())
    }

    pub fn finish(self, command: Command, config: &RunConfig) -> Result<()> {
        let path = self.out_dir.join(MANIFEST);
        let mut doc: Value = match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).unwrap_or_else(|_| json!({})),
            Err(_) => json!({}),
        };
        if !doc.get("runs").is_some_and(Value::is_object) {
            doc = json!({ "tool": "fleetrisk", "runs": {} });
        }
        doc["version"] = json!(env!("CARGO_PKG_VERSION"));
        doc["runs"][command.name()] = json!({
            "seed": config.seed,
            "derived_seeds": config.seeds(),
            "config": config.for_manifest(),
            "inputs": self.inputs,
            "artifacts": self.written,
            "created_at": chrono::Utc::now().to_rfc3339(),
        });
        let mut text = serde_json::to_string_pretty(&doc)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

//! Run manifests: every command writes a manifest.json describing what ran,
//! with what flags and seeds, over which inputs (content-addressed), and
//! what it produced or skipped. Rerunning a command reproduces every output
//! byte for byte; only `created_at` differs.

use std::collections::BTreeMap;
use std::fmt::Display;
use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
pub struct InputDigest {
    pub path: String,
    pub sha256: String,
}

#[derive(Serialize)]
pub struct PartialFailure {
    pub item: String,
    pub reason: String,
}

#[derive(Serialize)]
pub struct RunManifest {
    tool: &'static str,
    version: &'static str,
    command: &'static str,
    created_at: String,
    flags: BTreeMap<String, String>,
    seeds: BTreeMap<String, u64>,
    inputs: Vec<InputDigest>,
    outputs: Vec<String>,
    partial_failures: Vec<PartialFailure>,
}

impl RunManifest {
    pub fn new(command: &'static str) -> Self {
        Self {
            tool: "esgmv",
            version: env!("CARGO_PKG_VERSION"),
            command,
            created_at: chrono::Utc::now().to_rfc3339(),
            flags: BTreeMap::new(),
            seeds: BTreeMap::new(),
            inputs: Vec::new(),
            outputs: Vec::new(),
            partial_failures: Vec::new(),
        }
    }

    pub fn flag(&mut self, key: &str, value: impl Display) -> &mut Self {
        self.flags.insert(key.to_string(), value.to_string());
        self
    }

    pub fn seed(&mut self, name: &str, value: u64) -> &mut Self {
        self.seeds.insert(name.to_string(), value);
        self
    }

    pub fn input(&mut self, path: &Path) -> Result<&mut Self> {
        let bytes = fs::read(path)
            .with_context(|| format!("reading input {} for its digest", path.display()))?;
        self.inputs.push(InputDigest {
            path: path.display().to_string(),
            sha256: hex::encode(Sha256::digest(&bytes)),
        });
        Ok(self)
    }

    pub fn output(&mut self, name: &str) -> &mut Self {
        self.outputs.push(name.to_string());
        self
    }

    pub fn failure(&mut self, item: impl Into<String>, reason: impl Into<String>) -> &mut Self {
        self.partial_failures.push(PartialFailure {
            item: item.into(),
            reason: reason.into(),
        });
        self
    }

    pub fn has_failures(&self) -> bool {
        !self.partial_failures.is_empty()
    }

    /// Serializes to `<dir>/manifest.json`.
    pub fn write(&self, dir: &Path) -> Result<()> {
        let path = dir.join("manifest.json");
        let json = serde_json::to_string_pretty(self).context("serializing manifest")?;
        fs::write(&path, json + "\n")
            .with_context(|| format!("writing {}", path.display()))?;
        Ok(())
    }
}

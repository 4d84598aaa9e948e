//! Per-scenario manifest: what was run, with which inputs, and the hash of
//! every file written. No wall-clock fields, so reruns are byte-identical.

use std::collections::BTreeMap;
use std::path::Path;

use fmto_core::{Error, Result};
use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::config::{RunConfig, Scenario};

pub const MANIFEST_FILE: &str = "manifest.toml";
pub const FORMAT: &str = "fmto-manifest-1";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OutputEntry {
    pub file: String,
    pub sha256: String,
    pub bytes: u64,
    pub description: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Manifest {
    pub format: &'static str,
    pub tool: &'static str,
    pub version: &'static str,
    pub scenario: String,
    pub command: &'static str,
    pub seed: u64,
    /// SHA-256 of the scenario and presets exactly as serialized below.
    pub config_sha256: String,
    pub outputs: Vec<OutputEntry>,
    pub results: BTreeMap<String, f64>,
    pub notes: Vec<String>,
    pub config: ResolvedConfig,
}

/// The scenario after defaults and the seed override are applied, plus
/// the user presets it may refer to.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ResolvedConfig {
    pub material: BTreeMap<String, fmto_core::presets::MaterialPreset>,
    pub oscillator: BTreeMap<String, fmto_core::presets::OscillatorPreset>,
    pub scenario: Vec<Scenario>,
}

impl ResolvedConfig {
    pub fn new(cfg: &RunConfig, scenario: &Scenario) -> Self {
        Self {
            material: cfg.material.clone(),
            oscillator: cfg.oscillator.clone(),
            scenario: vec![scenario.clone()],
        }
    }

    pub fn to_toml(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_sha256(path: &Path) -> Result<(String, u64)> {
    let mut h = Sha256::new();
    let n = std::io::copy(&mut std::fs::File::open(path)?, &mut h)?;
    Ok((h.finalize().iter().map(|b| format!("{b:02x}")).collect(), n))
}

/// Hashes every file under `dir` (recursively, sorted), except the
/// manifest itself.
pub fn collect_outputs(
    dir: &Path,
    descriptions: &BTreeMap<String, String>,
) -> Result<Vec<OutputEntry>> {
    let mut files = Vec::new();
    for entry in walkdir::WalkDir::new(dir).sort_by_file_name() {
        let entry = entry.map_err(|e| Error::Io(e.into()))?;
        if entry.file_type().is_file() {
            let rel = entry.path().strip_prefix(dir).expect("under root");
            files.push(
                rel.components()
                    .map(|c| c.as_os_str().to_string_lossy())
                    .collect::<Vec<_>>()
                    .join("/"),
            );
        }
    }
    files.sort();
    files
        .into_iter()
        .filter(|rel| rel != MANIFEST_FILE)
        .map(|rel| {
            let (sha256, bytes) = file_sha256(&dir.join(&rel))?;
            let description = descriptions
                .get(&rel)
                .cloned()
                .or_else(|| {
                    rel.split('/')
                        .next()
                        .and_then(|top| descriptions.get(top).cloned())
                })
                .unwrap_or_default();
            Ok(OutputEntry {
                file: rel,
                sha256,
                bytes,
                description,
            })
        })
        .collect()
}

impl Manifest {
    pub fn write(&self, dir: &Path) -> Result<()> {
        let text = toml::to_string(self).map_err(|e| Error::Config(e.to_string()))?;
        std::fs::write(dir.join(MANIFEST_FILE), text)?;
        Ok(())
    }
}

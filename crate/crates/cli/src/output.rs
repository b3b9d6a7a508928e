//! Run directories and manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const OUTPUT_ROOT_VAR: &str = "RYDFRAG_OUTPUT_ROOT";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn output_root() -> PathBuf {
    std::env::var_os(OUTPUT_ROOT_VAR).map_or_else(|| PathBuf::from("runs"), PathBuf::from)
}

/// Files and scalar summaries produced by one workflow run.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Artifacts {
    pub files: BTreeMap<String, Vec<u8>>,
    pub scalars: BTreeMap<String, f64>,
}

impl Artifacts {
    pub fn file(&mut self, path: impl Into<String>, content: impl Into<Vec<u8>>) {
        self.files.insert(path.into(), content.into());
    }

    pub fn json(&mut self, path: impl Into<String>, value: &impl Serialize) {
        let mut text = serde_json::to_string_pretty(value).expect("outputs serialize");
        text.push('\n');
        self.file(path, text);
    }

    /// Non-finite values (failed fits, empty windows) are left out.
    pub fn scalar(&mut self, key: impl Into<String>, value: f64) {
        if value.is_finite() {
            self.scalars.insert(key.into(), value + 0.0);
        }
    }

    /// Nest another run's files under `prefix/`.
    pub fn absorb(&mut self, prefix: &str, other: Artifacts) {
        for (p, c) in other.files {
            self.files.insert(format!("{prefix}/{p}"), c);
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub command: String,
    pub workflow: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub preset: Option<String>,
    pub seed: u64,
    pub versions: BTreeMap<String, String>,
    pub config_sha256: String,
    /// Canonical TOML of the validated configuration.
    pub config: String,
    pub files: Vec<FileEntry>,
    pub scalars: BTreeMap<String, f64>,
}

pub fn versions() -> BTreeMap<String, String> {
    BTreeMap::from([
        ("rydfrag".to_string(), rydfrag::VERSION.to_string()),
        ("rydfrag-cli".to_string(), env!("CARGO_PKG_VERSION").to_string()),
    ])
}

/// Directory name `<name>-<first 12 hex digits of the config hash>`.
pub fn run_dir_name(name: &str, config_sha: &str) -> String {
    let safe: String = name
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || "_-".contains(c) { c } else { '_' })
        .collect();
    format!("{safe}-{}", &config_sha[..12])
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(parent) = path.parent() {
        std::fs::create_dir_all(parent).map_err(|e| CliError::io(parent.display(), e))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::io(path.display(), e))
}

/// Write every artifact plus `config.toml` and `manifest.json` into `dir`.
pub fn write_run(dir: &Path, mut artifacts: Artifacts, mut manifest: Manifest) -> Result<Manifest, CliError> {
    artifacts.file("config.toml", manifest.config.clone());
    manifest.files = artifacts
        .files
        .iter()
        .map(|(p, c)| FileEntry {
            path: p.clone(),
            sha256: sha256_hex(c),
            bytes: c.len() as u64,
        })
        .collect();
    manifest.scalars = artifacts.scalars.clone();
    for (p, c) in &artifacts.files {
        write(&dir.join(p), c)?;
    }
    let mut text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    text.push('\n');
    write(&dir.join("manifest.json"), text.as_bytes())?;
    Ok(manifest)
}

/// Recompute file hashes under `dir` and report mismatches.
pub fn verify(dir: &Path, manifest: &Manifest) -> Vec<String> {
    manifest
        .files
        .iter()
        .filter_map(|f| match std::fs::read(dir.join(&f.path)) {
            Ok(bytes) if sha256_hex(&bytes) == f.sha256 && bytes.len() as u64 == f.bytes => None,
            Ok(_) => Some(format!("{}: hash mismatch", f.path)),
            Err(e) => Some(format!("{}: {e}", f.path)),
        })
        .collect()
}

/// Comma-separated table with a header row.
pub fn csv_table(header: &[String], rows: &[Vec<String>]) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for r in rows {
        out.push_str(&r.join(","));
        out.push('\n');
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_hash() {
        assert_eq!(sha256_hex(b"abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
    }

    #[test]
    fn dir_names_are_sanitized() {
        assert_eq!(run_dir_name("a b/c", &"0123456789abcdef".repeat(4)), "a_b_c-0123456789ab");
    }
}

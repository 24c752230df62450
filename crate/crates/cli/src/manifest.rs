use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{CliError, Result};

/// Provenance of one run, embedded in JSON outputs and written next to
/// text outputs as `<output>.manifest.json`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub subcommand: String,
    pub version: String,
    pub seed: Option<u64>,
    pub inputs: Vec<InputRecord>,
    pub options: serde_json::Value,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InputRecord {
    pub path: PathBuf,
    pub sha256: String,
}

/// A JSON output with its manifest.
#[derive(Debug, Serialize, Deserialize)]
pub struct Artifact<T> {
    pub manifest: RunManifest,
    pub data: T,
}

impl RunManifest {
    pub fn new(subcommand: &str, options: &impl Serialize, seed: Option<u64>) -> Self {
        RunManifest {
            subcommand: subcommand.to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            seed,
            inputs: Vec::new(),
            options: serde_json::to_value(options).unwrap_or(serde_json::Value::Null),
        }
    }

    pub fn record(&mut self, path: &Path, bytes: &[u8]) {
        self.inputs.push(InputRecord { path: path.to_path_buf(), sha256: hex::encode(Sha256::digest(bytes)) });
    }
}

pub fn sidecar(path: &Path) -> PathBuf {
    let mut name = path.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

/// Manifest of an existing output, embedded or alongside it.
fn existing_manifest(path: &Path) -> Option<RunManifest> {
    let embedded = fs::read_to_string(path)
        .ok()
        .and_then(|text| serde_json::from_str::<Artifact<serde_json::Value>>(&text).ok())
        .map(|a| a.manifest);
    embedded.or_else(|| {
        let text = fs::read_to_string(sidecar(path)).ok()?;
        serde_json::from_str(&text).ok()
    })
}

/// Refuses to replace an output produced from other inputs, or one decsynth
/// did not write, unless `force` is set.
pub fn guard(path: &Path, manifest: &RunManifest, force: bool) -> Result<()> {
    if force || !path.exists() {
        return Ok(());
    }
    match existing_manifest(path) {
        Some(old) if old.subcommand == manifest.subcommand && old.inputs == manifest.inputs => Ok(()),
        Some(_) => Err(CliError::Drift { path: path.to_path_buf() }),
        None => Err(CliError::Unmanaged { path: path.to_path_buf() }),
    }
}

pub fn write_file(path: &Path, contents: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(CliError::io(dir))?;
    }
    fs::write(path, contents).map_err(CliError::io(path))
}

/// Writes a text output and its sidecar manifest, or prints it.
pub fn emit_text(path: Option<&Path>, text: &str, manifest: &RunManifest, force: bool) -> Result<()> {
    let Some(path) = path else {
        print!("{text}");
        return Ok(());
    };
    guard(path, manifest, force)?;
    write_file(path, text.as_bytes())?;
    let json = serde_json::to_string_pretty(manifest).expect("manifest serialises");
    write_file(&sidecar(path), json.as_bytes())
}

/// Writes a JSON artifact embedding `manifest`, or prints it.
pub fn emit_json<T: Serialize>(path: Option<&Path>, data: T, manifest: &RunManifest, force: bool) -> Result<()> {
    if let Some(path) = path {
        guard(path, manifest, force)?;
    }
    let artifact = Artifact { manifest: manifest.clone(), data };
    let mut json = serde_json::to_string_pretty(&artifact).expect("artifact serialises");
    json.push('\n');
    match path {
        Some(path) => write_file(path, json.as_bytes()),
        None => {
            print!("{json}");
            Ok(())
        }
    }
}

/// Reads an input and records its hash.
pub fn read_input(path: &Path, manifest: &mut RunManifest) -> Result<String> {
    let bytes = fs::read(path).map_err(CliError::io(path))?;
    manifest.record(path, &bytes);
    String::from_utf8(bytes).map_err(|e| CliError::input(path, e))
}

/// Parses JSON written by decsynth, with or without its manifest wrapper.
pub fn parse_json<T: DeserializeOwned>(path: &Path, text: &str) -> Result<T> {
    if let Ok(artifact) = serde_json::from_str::<Artifact<T>>(text) {
        return Ok(artifact.data);
    }
    serde_json::from_str(text).map_err(|source| CliError::Json { path: path.to_path_buf(), source })
}

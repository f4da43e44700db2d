//! Run artifacts: payload files written atomically under the output
//! directory and listed with their SHA-256 in `manifest.json`.

use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::CliError;

pub const MANIFEST: &str = "manifest.json";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ArtifactKind {
    LimitSets,
    FiniteSpectrum,
    WidomVerify,
    Asymptotics,
    Genericity,
    PlotData,
    ErrorReport,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunArtifact {
    pub kind: ArtifactKind,
    /// Path relative to the output directory.
    pub payload: String,
    /// Hex SHA-256 of the payload bytes.
    pub checksum: String,
    pub config: serde_json::Value,
    /// Seconds since the epoch; not part of any checksum.
    pub created_unix: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub artifacts: Vec<RunArtifact>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

/// Writes through a temporary file in the target directory and renames it
/// into place.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> std::io::Result<()> {
    let dir = path.parent().unwrap_or(Path::new("."));
    let mut tmp = tempfile::NamedTempFile::new_in(dir)?;
    tmp.write_all(bytes)?;
    tmp.as_file().sync_all()?;
    tmp.persist(path).map_err(|e| e.error)?;
    Ok(())
}

pub fn read_manifest(out: &Path) -> Result<Manifest, CliError> {
    let path = out.join(MANIFEST);
    if !path.exists() {
        return Ok(Manifest::default());
    }
    let text = std::fs::read_to_string(&path)?;
    serde_json::from_str(&text)
        .map_err(|e| CliError::BadConfig(format!("unreadable {}: {e}", path.display())))
}

/// Payloads whose bytes no longer match the recorded checksum.
pub fn verify_manifest(out: &Path) -> Result<Vec<String>, CliError> {
    let manifest = read_manifest(out)?;
    let mut bad = Vec::new();
    for a in &manifest.artifacts {
        match std::fs::read(out.join(&a.payload)) {
            Ok(bytes) if sha256_hex(&bytes) == a.checksum => {}
            _ => bad.push(a.payload.clone()),
        }
    }
    Ok(bad)
}

/// Collects the artifacts of one command run.
pub struct ArtifactWriter {
    out: PathBuf,
    config: serde_json::Value,
    written: Vec<RunArtifact>,
}

impl ArtifactWriter {
    pub fn new(out: &Path, config: serde_json::Value) -> Result<Self, CliError> {
        std::fs::create_dir_all(out)?;
        Ok(Self {
            out: out.to_path_buf(),
            config,
            written: Vec::new(),
        })
    }

    pub fn out(&self) -> &Path {
        &self.out
    }

    pub fn write(
        &mut self,
        kind: ArtifactKind,
        name: &str,
        bytes: &[u8],
    ) -> Result<PathBuf, CliError> {
        let path = self.out.join(name);
        write_atomic(&path, bytes)?;
        let created_unix = SystemTime::now()
            .duration_since(UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        self.written.push(RunArtifact {
            kind,
            payload: name.to_string(),
            checksum: sha256_hex(bytes),
            config: self.config.clone(),
            created_unix,
        });
        Ok(path)
    }

    pub fn write_json(
        &mut self,
        kind: ArtifactKind,
        name: &str,
        value: &serde_json::Value,
    ) -> Result<PathBuf, CliError> {
        let mut bytes = serde_json::to_vec_pretty(value).expect("json value serializes");
        bytes.push(b'\n');
        self.write(kind, name, &bytes)
    }

    /// Merges this run into `manifest.json`, replacing older entries for the
    /// same payload paths.
    pub fn finish(self) -> Result<Vec<RunArtifact>, CliError> {
        let mut manifest = read_manifest(&self.out)?;
        manifest
            .artifacts
            .retain(|a| !self.written.iter().any(|w| w.payload == a.payload));
        manifest.artifacts.extend(self.written.iter().cloned());
        let mut bytes = serde_json::to_vec_pretty(&manifest).expect("manifest serializes");
        bytes.push(b'\n');
        write_atomic(&self.out.join(MANIFEST), &bytes)?;
        Ok(self.written)
    }
}

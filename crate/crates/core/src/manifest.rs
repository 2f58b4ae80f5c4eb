//! Run manifests: seed, config digest and content digests of every output.
//!
//! Manifests hold only relative paths and no timestamps, so two runs with the
//! same inputs and seed produce byte-identical manifests.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FileEntry {
    /// Path relative to the output directory, `/`-separated.
    pub path: String,
    pub sha256: String,
}

impl FileEntry {
    pub fn new(root: &Path, path: &Path) -> Result<Self> {
        Ok(FileEntry {
            path: relative(root, path),
            sha256: sha256_file(path)?,
        })
    }
}

pub(crate) fn relative(root: &Path, path: &Path) -> String {
    let rel = path.strip_prefix(root).unwrap_or(path);
    rel.components()
        .map(|c| c.as_os_str().to_string_lossy())
        .collect::<Vec<_>>()
        .join("/")
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CellEntry {
    pub kind: String,
    pub train_p: f64,
    pub test_p: f64,
    pub seed: u64,
    pub train: String,
    pub val: String,
    pub test: String,
    /// Digest over the three split files of the cell.
    pub digest: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config_digest: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub cells: Vec<CellEntry>,
    pub files: Vec<FileEntry>,
    /// Digest of everything above, filled by [`Manifest::seal`].
    #[serde(default)]
    pub digest: String,
}

impl Manifest {
    pub fn new(command: impl Into<String>, seed: u64) -> Self {
        Manifest {
            tool: env!("CARGO_PKG_NAME").to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            command: command.into(),
            seed,
            config_digest: None,
            cells: Vec::new(),
            files: Vec::new(),
            digest: String::new(),
        }
    }

    pub fn add_file(&mut self, root: &Path, path: &Path) -> Result<()> {
        self.files.push(FileEntry::new(root, path)?);
        Ok(())
    }

    /// Sort entries and compute the overall digest.
    pub fn seal(&mut self) -> Result<&str> {
        self.files.sort_by(|a, b| a.path.cmp(&b.path));
        self.files.dedup();
        self.digest = String::new();
        self.digest = sha256_hex(&serde_json::to_vec(self)?);
        Ok(&self.digest)
    }

    /// Seal and write `manifest.json` into `dir`.
    pub fn write(&mut self, dir: &Path) -> Result<()> {
        self.write_to(&dir.join(MANIFEST_FILE))
    }

    /// Seal and write to an explicit path.
    pub fn write_to(&mut self, path: &Path) -> Result<()> {
        self.seal()?;
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        fs::write(path, text).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Ok(serde_json::from_str(&text)?)
    }
}

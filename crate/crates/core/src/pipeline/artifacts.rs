//! Artifact layout and provenance manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{Error, Result};

pub const TOOL: &str = "auditbench";
pub const VERSION: &str = env!("CARGO_PKG_VERSION");

pub fn sha256_bytes(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(sha256_bytes(&bytes))
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub(crate) fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    write_file(path, &bytes)
}

pub(crate) fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    Ok(serde_json::from_slice(&bytes)?)
}

/// Where every stage reads and writes, relative to one output directory.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Layout {
    pub root: PathBuf,
}

impl Layout {
    pub fn new(root: impl Into<PathBuf>) -> Self {
        Layout { root: root.into() }
    }

    pub fn config(&self) -> PathBuf {
        self.root.join("config.toml")
    }

    pub fn dataset(&self) -> PathBuf {
        self.root.join("dataset.csv")
    }

    pub fn split(&self) -> PathBuf {
        self.root.join("split.json")
    }

    pub fn encoded_dir(&self, encoding: &str) -> PathBuf {
        self.root.join("encoded").join(encoding)
    }

    pub fn encoder(&self, encoding: &str) -> PathBuf {
        self.encoded_dir(encoding).join("encoder.json")
    }

    pub fn encoded_train(&self, encoding: &str) -> PathBuf {
        self.encoded_dir(encoding).join("train.csv")
    }

    pub fn encoded_test(&self, encoding: &str) -> PathBuf {
        self.encoded_dir(encoding).join("test.csv")
    }

    pub fn model(&self, cell: &str) -> PathBuf {
        self.root.join("models").join(format!("{cell}.model"))
    }

    pub fn scores(&self, cell: &str) -> PathBuf {
        self.root.join("scores").join(format!("{cell}.csv"))
    }

    pub fn reports_dir(&self) -> PathBuf {
        self.root.join("reports")
    }

    pub fn report(&self, cell: &str) -> PathBuf {
        self.reports_dir().join(format!("{cell}.json"))
    }

    pub fn summary(&self) -> PathBuf {
        self.reports_dir().join("summary.csv")
    }

    /// Path written next to an artifact to describe it.
    pub fn manifest_for(artifact: &Path) -> PathBuf {
        let mut name = artifact.file_name().map(|n| n.to_os_string()).unwrap_or_default();
        name.push(".manifest.json");
        artifact.with_file_name(name)
    }

    fn relative(&self, p: &Path) -> String {
        p.strip_prefix(&self.root).unwrap_or(p).to_string_lossy().replace('\\', "/")
    }
}

/// Provenance of one stage output: tool version, stage seed, parameters and
/// the hashes of every input and output file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StageManifest {
    pub tool: String,
    pub version: String,
    pub stage: String,
    pub seed: u64,
    pub params: serde_json::Value,
    pub inputs: BTreeMap<String, String>,
    pub outputs: BTreeMap<String, String>,
}

impl StageManifest {
    pub fn build(layout: &Layout, stage: &str, seed: u64, params: serde_json::Value, inputs: &[&Path], outputs: &[&Path]) -> Result<Self> {
        let hashes = |paths: &[&Path]| -> Result<BTreeMap<String, String>> {
            paths.iter().map(|p| Ok((layout.relative(p), sha256_file(p)?))).collect()
        };
        Ok(StageManifest {
            tool: TOOL.into(),
            version: VERSION.into(),
            stage: stage.into(),
            seed,
            params,
            inputs: hashes(inputs)?,
            outputs: hashes(outputs)?,
        })
    }

    /// Writes the manifest next to `artifact`. When a manifest from an
    /// earlier run has the same inputs and parameters but different output
    /// hashes, the rerun was not reproducible and a warning is logged.
    pub fn write_for(&self, artifact: &Path) -> Result<PathBuf> {
        let path = Layout::manifest_for(artifact);
        if let Ok(previous) = read_json::<StageManifest>(&path) {
            if previous.inputs == self.inputs && previous.params == self.params && previous.outputs != self.outputs {
                log::warn!("stage {}: outputs differ from the previous run with identical inputs", self.stage);
            }
        }
        write_json(&path, self)?;
        Ok(path)
    }

    pub fn read_for(artifact: &Path) -> Result<Self> {
        read_json(&Layout::manifest_for(artifact))
    }

    /// Checks the recorded output hashes against the files on disk.
    pub fn verify(&self, layout: &Layout) -> Result<()> {
        for (rel, hash) in &self.outputs {
            let actual = sha256_file(&layout.root.join(rel))?;
            if &actual != hash {
                return Err(Error::InvalidInput(format!("{rel}: hash {actual} does not match manifest {hash}")));
            }
        }
        Ok(())
    }
}

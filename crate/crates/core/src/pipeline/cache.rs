//! Content-hash stage caching.
//!
//! Every stage records a manifest holding its input key (a digest over its
//! input file contents and config subset) and its output paths. A stage is
//! skipped when its manifest matches the current input key and the outputs
//! exist. Downstream stages fold the *content* digests of their input files
//! into their own keys, so corrupting an intermediate file re-executes
//! exactly the stages that consume it.

use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub fn digest_file(path: &Path) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    Ok(hex(&hasher.finalize()))
}

pub fn digest_parts(parts: &[&str]) -> String {
    let mut hasher = Sha256::new();
    for part in parts {
        hasher.update((part.len() as u64).to_le_bytes());
        hasher.update(part.as_bytes());
    }
    hex(&hasher.finalize())
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

/// Manifest store rooted at one directory.
#[derive(Debug, Clone)]
pub struct StageCache {
    dir: PathBuf,
}

impl StageCache {
    pub fn new(dir: impl Into<PathBuf>) -> Result<Self> {
        let dir = dir.into();
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(StageCache { dir })
    }

    fn manifest_path(&self, stage: &str) -> PathBuf {
        self.dir.join(format!("{stage}.manifest"))
    }

    /// True when the stage's recorded input key matches and all recorded
    /// outputs still exist.
    pub fn is_fresh(&self, stage: &str, input_key: &str) -> bool {
        let Ok(text) = fs::read_to_string(self.manifest_path(stage)) else {
            return false;
        };
        let mut lines = text.lines();
        if lines.next() != Some(input_key) {
            return false;
        }
        lines.filter(|l| !l.is_empty()).all(|l| Path::new(l).exists())
    }

    pub fn record(&self, stage: &str, input_key: &str, outputs: &[&Path]) -> Result<()> {
        let mut text = String::from(input_key);
        text.push('\n');
        for output in outputs {
            text.push_str(&output.display().to_string());
            text.push('\n');
        }
        let path = self.manifest_path(stage);
        fs::write(&path, text).map_err(|e| Error::io(&path, e))
    }
}

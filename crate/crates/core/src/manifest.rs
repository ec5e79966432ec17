//! Per-command run manifests with artifact digests.

use std::fs;
use std::path::Path;
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::jsonl::{sha256_file, JsonlError};

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ArtifactDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

impl ArtifactDigest {
    pub fn of(path: &Path) -> Result<Self, JsonlError> {
        let bytes = fs::metadata(path)
            .map_err(|source| JsonlError::Io {
                path: path.display().to_string(),
                source,
            })?
            .len();
        Ok(Self {
            path: path.display().to_string(),
            sha256: sha256_file(path)?,
            bytes,
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name; replaying them reproduces the
    /// outputs of deterministic policies.
    pub argv: Vec<String>,
    pub config: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub started_unix: u64,
    pub finished_unix: u64,
    pub inputs: Vec<ArtifactDigest>,
    pub outputs: Vec<ArtifactDigest>,
}

fn now() -> u64 {
    SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs())
        .unwrap_or(0)
}

impl RunManifest {
    pub fn start(command: impl Into<String>, argv: Vec<String>, config: serde_json::Value, seed: Option<u64>) -> Self {
        Self {
            command: command.into(),
            argv,
            config,
            seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started_unix: now(),
            finished_unix: 0,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) -> Result<(), JsonlError> {
        self.inputs.push(ArtifactDigest::of(path)?);
        Ok(())
    }

    pub fn output(&mut self, path: &Path) -> Result<(), JsonlError> {
        self.outputs.push(ArtifactDigest::of(path)?);
        Ok(())
    }

    /// Stamp the finish time and write the manifest to `path`.
    pub fn finish(mut self, path: &Path) -> Result<Self, JsonlError> {
        self.finished_unix = now();
        fs::write(
            path,
            serde_json::to_string_pretty(&self).expect("manifest serializes") + "\n",
        )
        .map_err(|source| JsonlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Ok(self)
    }

    pub fn load(path: &Path) -> Result<Self, JsonlError> {
        let text = fs::read_to_string(path).map_err(|source| JsonlError::Io {
            path: path.display().to_string(),
            source,
        })?;
        serde_json::from_str(&text).map_err(|source| JsonlError::Parse {
            path: path.display().to_string(),
            line: 1,
            source,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn digests_cover_outputs() {
        let dir = tempfile::tempdir().unwrap();
        let out = dir.path().join("a.txt");
        fs::write(&out, "abc").unwrap();
        let mut m = RunManifest::start("run", vec!["run".into()], serde_json::json!({}), Some(7));
        m.output(&out).unwrap();
        let m = m.finish(&dir.path().join(MANIFEST_FILE)).unwrap();
        assert_eq!(m.outputs[0].bytes, 3);
        assert_eq!(
            m.outputs[0].sha256,
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
        assert_eq!(RunManifest::load(&dir.path().join(MANIFEST_FILE)).unwrap(), m);
    }
}

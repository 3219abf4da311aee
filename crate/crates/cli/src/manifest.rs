//! Run manifests: what was run, with which parameters, and what it wrote.

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputFile {
    /// Path relative to the output directory.
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub parameters: serde_json::Value,
    pub seed: Option<u64>,
    pub tool_version: String,
    pub started_at: String,
    pub finished_at: String,
    pub outputs: Vec<OutputFile>,
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

impl RunManifest {
    pub fn read(path: &Path) -> anyhow::Result<Self> {
        let text = fs::read_to_string(path)?;
        Ok(serde_json::from_str(&text)?)
    }

    /// Problems found when re-hashing the listed files under `dir`; empty
    /// when everything matches.
    pub fn verify(&self, dir: &Path) -> Vec<String> {
        let mut problems = Vec::new();
        for out in &self.outputs {
            match fs::read(dir.join(&out.path)) {
                Ok(bytes) => {
                    let hash = sha256_hex(&bytes);
                    if hash != out.sha256 {
                        problems.push(format!("{}: hash {} != {}", out.path, hash, out.sha256));
                    }
                }
                Err(e) => problems.push(format!("{}: {e}", out.path)),
            }
        }
        problems
    }
}

/// Collects files written by one command and finishes with a manifest.
pub struct OutputDir {
    dir: PathBuf,
    outputs: Vec<OutputFile>,
    command: String,
    parameters: serde_json::Value,
    seed: Option<u64>,
    started_at: String,
}

fn now() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Millis, true)
}

impl OutputDir {
    pub fn create(
        dir: PathBuf,
        command: &str,
        parameters: serde_json::Value,
        seed: Option<u64>,
    ) -> anyhow::Result<Self> {
        fs::create_dir_all(&dir)?;
        Ok(Self {
            dir,
            outputs: Vec::new(),
            command: command.to_string(),
            parameters,
            seed,
            started_at: now(),
        })
    }

    pub fn write(&mut self, name: &str, bytes: impl AsRef<[u8]>) -> anyhow::Result<PathBuf> {
        let bytes = bytes.as_ref();
        let path = self.dir.join(name);
        fs::write(&path, bytes)?;
        self.outputs.retain(|o| o.path != name);
        self.outputs.push(OutputFile {
            path: name.to_string(),
            sha256: sha256_hex(bytes),
            bytes: bytes.len() as u64,
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> anyhow::Result<PathBuf> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write(name, text)
    }

    pub fn finish(self) -> anyhow::Result<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            parameters: self.parameters,
            seed: self.seed,
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            started_at: self.started_at,
            finished_at: now(),
            outputs: self.outputs,
        };
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(self.dir.join(MANIFEST_NAME), text)?;
        Ok(manifest)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn known_digest() {
        assert_eq!(
            sha256_hex(b"abc"),
            "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad"
        );
    }

    #[test]
    fn round_trip_and_tamper() {
        let tmp = tempfile::tempdir().unwrap();
        let mut out = OutputDir::create(tmp.path().to_path_buf(), "t", serde_json::json!({"a": 1}), Some(3)).unwrap();
        out.write("a.txt", "hello").unwrap();
        out.write_json("b.json", &vec![1, 2]).unwrap();
        out.finish().unwrap();

        let m = RunManifest::read(&tmp.path().join(MANIFEST_NAME)).unwrap();
        assert_eq!(m.outputs.len(), 2);
        assert_eq!(m.seed, Some(3));
        assert!(m.verify(tmp.path()).is_empty());

        fs::write(tmp.path().join("a.txt"), "hellO").unwrap();
        fs::remove_file(tmp.path().join("b.json")).unwrap();
        assert_eq!(m.verify(tmp.path()).len(), 2);
    }
}

//! Run manifests.
//!
//! Every artifact-producing command writes a manifest next to its output
//! recording the resolved configuration, the input paths, and a SHA-256
//! digest of each artifact, so any result on disk can be traced back to
//! the exact invocation that made it. Reproducibility is checked over
//! the artifact digests; the manifest itself carries a timestamp and is
//! not expected to be byte-stable.

use std::fs::File;
use std::io::{BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use anyhow::Context;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize, Deserialize)]
pub struct ArtifactRecord {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub config_version: u32,
    pub config: serde_json::Value,
    pub config_hash: String,
    pub inputs: Vec<String>,
    pub artifacts: Vec<ArtifactRecord>,
    pub created_unix: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, inputs: &[&Path]) -> RunManifest {
        RunManifest {
            command: command.to_string(),
            config_version: tandem::defaults::CONFIG_VERSION,
            config_hash: hex(&Sha256::digest(config.to_string().as_bytes())),
            config,
            inputs: inputs.iter().map(|p| p.display().to_string()).collect(),
            artifacts: Vec::new(),
            created_unix: SystemTime::now()
                .duration_since(UNIX_EPOCH)
                .map(|d| d.as_secs())
                .unwrap_or(0),
        }
    }

    /// Hash `path` and append it to the artifact list.
    pub fn record(&mut self, path: &Path) -> anyhow::Result<()> {
        let (sha256, bytes) = sha256_file(path)?;
        self.artifacts.push(ArtifactRecord {
            path: path.display().to_string(),
            sha256,
            bytes,
        });
        Ok(())
    }

    pub fn write(&self, path: &Path) -> anyhow::Result<()> {
        let file =
            File::create(path).with_context(|| format!("writing manifest {}", path.display()))?;
        let mut w = BufWriter::new(file);
        serde_json::to_writer_pretty(&mut w, self)?;
        w.write_all(b"\n")?;
        w.flush()?;
        Ok(())
    }
}

/// Write a one-artifact manifest at the artifact's sidecar path.
pub fn write_for(
    command: &str,
    config: serde_json::Value,
    inputs: &[&Path],
    artifact: &Path,
) -> anyhow::Result<()> {
    let mut m = RunManifest::new(command, config, inputs);
    m.record(artifact)?;
    m.write(&sidecar_path(artifact))
}

/// The manifest path for a file-shaped artifact: the artifact path with
/// `.manifest.json` appended.
pub fn sidecar_path(artifact: &Path) -> PathBuf {
    let mut s = artifact.as_os_str().to_os_string();
    s.push(".manifest.json");
    PathBuf::from(s)
}

/// SHA-256 of a file's bytes (hex) plus its size.
pub fn sha256_file(path: &Path) -> anyhow::Result<(String, u64)> {
    let mut file = File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = [0u8; 64 * 1024];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    Ok((hex(&hasher.finalize()), total))
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}

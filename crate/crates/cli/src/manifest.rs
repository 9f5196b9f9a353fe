//! Run manifest: what ran, on which bytes, producing which bytes.
//!
//! Deliberately free of timestamps and host details so that two identical
//! runs produce identical manifests.

use std::io::Read;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FileDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub tool: &'static str,
    pub version: &'static str,
    pub command: &'static str,
    pub config: Value,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
}

pub fn sha256_file(path: &Path) -> anyhow::Result<(String, u64)> {
    let mut file = std::fs::File::open(path).with_context(|| format!("hashing {}", path.display()))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf)?;
        if n == 0 {
            break;
        }
        hasher.update(&buf[..n]);
        total += n as u64;
    }
    let hex = hasher.finalize().iter().map(|b| format!("{b:02x}")).collect();
    Ok((hex, total))
}

pub fn digest(path: &Path) -> anyhow::Result<FileDigest> {
    let (sha256, bytes) = sha256_file(path)?;
    Ok(FileDigest { path: path.display().to_string(), sha256, bytes })
}

impl RunManifest {
    pub fn new(command: &'static str, config: Value, seed: Option<u64>) -> Self {
        RunManifest {
            tool: env!("CARGO_BIN_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            command,
            config,
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
        }
    }

    pub fn inputs(mut self, paths: &[PathBuf]) -> anyhow::Result<Self> {
        self.inputs = paths.iter().map(|p| digest(p)).collect::<anyhow::Result<_>>()?;
        Ok(self)
    }

    pub fn outputs(mut self, paths: &[PathBuf]) -> anyhow::Result<Self> {
        self.outputs = paths.iter().map(|p| digest(p)).collect::<anyhow::Result<_>>()?;
        Ok(self)
    }

    /// To `path` when given, otherwise to stdout.
    pub fn emit(&self, path: Option<&Path>) -> anyhow::Result<()> {
        let mut text = serde_json::to_string_pretty(self)?;
        text.push('\n');
        match path {
            Some(p) => std::fs::write(p, text).with_context(|| format!("writing manifest {}", p.display())),
            None => {
                print!("{text}");
                Ok(())
            }
        }
    }
}

//! Run manifests: enough metadata to bit-reproduce a run, plus an FNV-1a
//! digest of every emitted data file.

use serde::{Deserialize, Serialize};
use std::fs;
use std::io;
use std::path::{Path, PathBuf};

pub const MANIFEST_SCHEMA_VERSION: u32 = 1;

pub fn fnv1a64(bytes: &[u8]) -> u64 {
    let mut hash: u64 = 0xcbf29ce484222325;
    for &b in bytes {
        hash ^= b as u64;
        hash = hash.wrapping_mul(0x100000001b3);
    }
    hash
}

pub fn digest_file(path: &Path) -> io::Result<u64> {
    Ok(fnv1a64(&fs::read(path)?))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub fnv1a64: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub schema_version: u32,
    pub command: String,
    pub tool_version: String,
    pub rng: String,
    pub args: serde_json::Value,
    pub duration_seconds: f64,
    pub outputs: Vec<OutputDigest>,
}

impl RunManifest {
    pub fn new(
        command: &str,
        args: serde_json::Value,
        duration_seconds: f64,
        outputs: &[(PathBuf, u64)],
    ) -> Self {
        RunManifest {
            schema_version: MANIFEST_SCHEMA_VERSION,
            command: command.to_string(),
            tool_version: env!("CARGO_PKG_VERSION").to_string(),
            rng: cchain_core::sampler::RNG_ALGORITHM.to_string(),
            args,
            duration_seconds,
            outputs: outputs
                .iter()
                .map(|(p, d)| OutputDigest {
                    path: p.display().to_string(),
                    fnv1a64: format!("{d:016x}"),
                })
                .collect(),
        }
    }

    pub fn write(&self, path: &Path) -> io::Result<()> {
        fs::write(path, crate::jsonio::to_json_bytes(self))
    }

    pub fn read(path: &Path) -> io::Result<Self> {
        let bytes = fs::read(path)?;
        serde_json::from_slice(&bytes)
            .map_err(|e| io::Error::new(io::ErrorKind::InvalidData, e.to_string()))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn fnv_reference_vectors() {
        // standard FNV-1a 64 test vectors
        assert_eq!(fnv1a64(b""), 0xcbf29ce484222325);
        assert_eq!(fnv1a64(b"a"), 0xaf63dc4c8601ec8c);
        assert_eq!(fnv1a64(b"foobar"), 0x85944171f73967e8);
    }
}

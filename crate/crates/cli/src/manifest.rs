//! Run manifests: every command writes `<output>.manifest.json` holding the
//! resolved configuration, library version, wall time, a result summary,
//! and SHA-256 digests of the files it wrote. Re-running with a manifest's
//! resolved configuration reproduces the outputs byte for byte.

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::ResolvedConfig;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct OutputDigest {
    pub path: String,
    pub sha256: String,
    pub bytes: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub resolved_config: ResolvedConfig,
    pub wall_time_s: f64,
    pub summary: serde_json::Value,
    pub outputs: Vec<OutputDigest>,
}

pub fn digest_file(path: &Path) -> std::io::Result<OutputDigest> {
    let bytes = fs::read(path)?;
    let mut hasher = Sha256::new();
    hasher.update(&bytes);
    let digest = hasher.finalize();
    let hex: String = digest.iter().map(|b| format!("{b:02x}")).collect();
    Ok(OutputDigest {
        path: path.display().to_string(),
        sha256: hex,
        bytes: bytes.len() as u64,
    })
}

impl RunManifest {
    pub fn write(&self, output_path: &Path) -> std::io::Result<std::path::PathBuf> {
        let manifest_path = manifest_path_for(output_path);
        let text = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(&manifest_path, text)?;
        Ok(manifest_path)
    }
}

pub fn manifest_path_for(output_path: &Path) -> std::path::PathBuf {
    let mut name = output_path.file_name().unwrap_or_default().to_os_string();
    name.push(".manifest.json");
    output_path.with_file_name(name)
}

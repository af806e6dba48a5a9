//! Run manifests.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::Value;
use sha2::{Digest, Sha256};

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub model_path: String,
    pub model_sha256: String,
    pub seed: Option<u64>,
    pub params: BTreeMap<String, Value>,
    pub version: String,
    pub duration_secs: f64,
}

pub struct ManifestBuilder {
    command: String,
    model_path: String,
    model_sha256: String,
    seed: Option<u64>,
    params: BTreeMap<String, Value>,
    start: Instant,
}

impl ManifestBuilder {
    pub fn new(command: &str, model_path: &Path, model_bytes: &[u8]) -> Self {
        ManifestBuilder {
            command: command.into(),
            model_path: model_path.display().to_string(),
            model_sha256: hex::encode(Sha256::digest(model_bytes)),
            seed: None,
            params: BTreeMap::new(),
            start: Instant::now(),
        }
    }

    pub fn seed(mut self, seed: u64) -> Self {
        self.seed = Some(seed);
        self
    }

    pub fn param(mut self, key: &str, value: impl Serialize) -> Self {
        self.params.insert(key.into(), serde_json::to_value(value).expect("serializable"));
        self
    }

    pub fn finish(&self) -> RunManifest {
        RunManifest {
            command: self.command.clone(),
            model_path: self.model_path.clone(),
            model_sha256: self.model_sha256.clone(),
            seed: self.seed,
            params: self.params.clone(),
            version: env!("CARGO_PKG_VERSION").into(),
            duration_secs: self.start.elapsed().as_secs_f64(),
        }
    }
}

/// `out.csv` → `out.csv.manifest.json`.
pub fn sidecar_path(out: &Path) -> PathBuf {
    let mut name = out.as_os_str().to_owned();
    name.push(".manifest.json");
    PathBuf::from(name)
}

pub fn write_with_manifest(out: &Path, contents: &str, manifest: &RunManifest) -> std::io::Result<()> {
    std::fs::write(out, contents)?;
    let json = serde_json::to_string_pretty(manifest).expect("serializable");
    std::fs::write(sidecar_path(out), json + "\n")
}

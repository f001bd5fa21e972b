use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::CliError;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Artifact {
    /// Path relative to the output directory.
    pub path: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: Option<PathBuf>,
    pub seed: Option<u64>,
    pub out_dir: PathBuf,
    pub wall_clock_seconds: f64,
    pub artifacts: Vec<Artifact>,
    /// Scalar diagnostics of the run.
    pub metrics: BTreeMap<String, Metric>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
#[serde(untagged)]
pub enum Metric {
    Count(u64),
    Value(f64),
}

/// Collects the artifacts of one run. Every file goes through
/// [`RunWriter::write`], so the hashes describe exactly what was written.
pub struct RunWriter {
    out_dir: PathBuf,
    started: Instant,
    artifacts: Vec<Artifact>,
    metrics: BTreeMap<String, Metric>,
}

impl RunWriter {
    pub fn create(out_dir: &Path) -> Result<Self, CliError> {
        fs::create_dir_all(out_dir).map_err(|source| CliError::Write {
            path: out_dir.to_path_buf(),
            source,
        })?;
        Ok(Self {
            out_dir: out_dir.to_path_buf(),
            started: Instant::now(),
            artifacts: Vec::new(),
            metrics: BTreeMap::new(),
        })
    }

    pub fn write(&mut self, name: &str, contents: &[u8]) -> Result<(), CliError> {
        let path = self.out_dir.join(name);
        fs::write(&path, contents).map_err(|source| CliError::Write { path, source })?;
        self.artifacts.push(Artifact {
            path: name.to_string(),
            bytes: contents.len(),
            sha256: sha256_hex(contents),
        });
        Ok(())
    }

    /// Records a diagnostic; non-finite values (such as a relative
    /// change of a zero amount) are left out.
    pub fn value(&mut self, name: &str, v: f64) {
        if v.is_finite() {
            self.metrics.insert(name.to_string(), Metric::Value(v));
        }
    }

    pub fn count(&mut self, name: &str, n: usize) {
        self.metrics.insert(name.to_string(), Metric::Count(n as u64));
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write(name, &crate::json::to_vec(value))
    }

    /// Writes `manifest.json` and returns its contents.
    pub fn finish(self, command: &str, config: Option<PathBuf>, seed: Option<u64>) -> Result<RunManifest, CliError> {
        let manifest = RunManifest {
            command: command.to_string(),
            config,
            seed,
            out_dir: self.out_dir.clone(),
            wall_clock_seconds: self.started.elapsed().as_secs_f64(),
            artifacts: self.artifacts,
            metrics: self.metrics,
        };
        let path = self.out_dir.join("manifest.json");
        fs::write(&path, crate::json::to_vec(&manifest)).map_err(|source| CliError::Write { path, source })?;
        Ok(manifest)
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

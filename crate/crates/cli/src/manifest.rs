//! `manifest.json`: what was run, on which inputs, and how long it took.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use serde::Serialize;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};
use crate::io::write_json;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, Serialize)]
pub struct FileDigest {
    pub path: PathBuf,
    pub sha256: String,
}

#[derive(Debug, Clone, Serialize)]
pub struct Stage {
    pub name: String,
    pub seconds: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct Timing {
    pub started_unix: f64,
    pub wall_seconds: f64,
    pub stages: Vec<Stage>,
}

#[derive(Debug, Clone, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub flags: serde_json::Value,
    pub seed: Option<u64>,
    pub version: String,
    pub inputs: Vec<FileDigest>,
    pub outputs: Vec<FileDigest>,
    /// The only fields that differ between identical reruns.
    pub timing: Timing,
}

pub fn sha256_file(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(Sha256::digest(&bytes).iter().map(|b| format!("{b:02x}")).collect())
}

fn digests(paths: &[PathBuf]) -> CliResult<Vec<FileDigest>> {
    paths
        .iter()
        .map(|p| {
            Ok(FileDigest {
                path: p.clone(),
                sha256: sha256_file(p)?,
            })
        })
        .collect()
}

/// Collects inputs, outputs and stage timings while a command runs.
pub struct Recorder {
    command: String,
    flags: serde_json::Value,
    seed: Option<u64>,
    inputs: Vec<PathBuf>,
    outputs: Vec<PathBuf>,
    started: SystemTime,
    clock: Instant,
    stage_clock: Instant,
    stages: Vec<Stage>,
}

impl Recorder {
    pub fn new(command: &str, flags: &impl Serialize, seed: Option<u64>) -> Self {
        let now = Instant::now();
        Self {
            command: command.to_string(),
            flags: serde_json::to_value(flags).unwrap_or(serde_json::Value::Null),
            seed,
            inputs: Vec::new(),
            outputs: Vec::new(),
            started: SystemTime::now(),
            clock: now,
            stage_clock: now,
            stages: Vec::new(),
        }
    }

    pub fn input(&mut self, path: &Path) {
        self.inputs.push(path.to_path_buf());
    }

    pub fn output(&mut self, path: &Path) {
        self.outputs.push(path.to_path_buf());
    }

    /// Closes the current stage and logs its duration.
    pub fn stage(&mut self, name: &str) {
        let seconds = self.stage_clock.elapsed().as_secs_f64();
        log::info!("{name}: {seconds:.2} s");
        self.stages.push(Stage {
            name: name.to_string(),
            seconds,
        });
        self.stage_clock = Instant::now();
    }

    /// Writes `manifest.json` into `dir`.
    pub fn finish(self, dir: &Path) -> CliResult<()> {
        let manifest = RunManifest {
            command: self.command,
            flags: self.flags,
            seed: self.seed,
            version: env!("CARGO_PKG_VERSION").to_string(),
            inputs: digests(&self.inputs)?,
            outputs: digests(&self.outputs)?,
            timing: Timing {
                started_unix: self
                    .started
                    .duration_since(UNIX_EPOCH)
                    .map(|d| d.as_secs_f64())
                    .unwrap_or(0.0),
                wall_seconds: self.clock.elapsed().as_secs_f64(),
                stages: self.stages,
            },
        };
        write_json(&dir.join(MANIFEST_FILE), &manifest)
    }
}

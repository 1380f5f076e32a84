//! Per-run output directories and reproducibility manifests.

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::config::RunConfig;
use crate::error::CliError;

pub const MANIFEST_FILE: &str = "manifest.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct OutputFile {
    pub file: String,
    pub sha256: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Versions {
    pub embpred: String,
    pub manifest_format: u32,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    /// Arguments after the program name, as given.
    pub argv: Vec<String>,
    /// Working directory the arguments are relative to.
    pub cwd: PathBuf,
    pub config: RunConfig,
    pub schema_hash: Option<String>,
    /// Input path (as given) to SHA-256 of its contents.
    pub inputs: BTreeMap<String, String>,
    pub seed: u64,
    pub versions: Versions,
    pub started_at: String,
    pub wall_time_secs: f64,
    pub outputs: Vec<OutputFile>,
}

impl RunManifest {
    pub fn load(path: &Path) -> Result<RunManifest, CliError> {
        let text = fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| CliError::Usage(format!("manifest {}: {e}", path.display())))
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

pub fn hash_file(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

/// An output directory being filled by one command.
pub struct Run {
    pub dir: PathBuf,
    started: Instant,
    started_at: String,
    inputs: BTreeMap<String, String>,
    outputs: Vec<OutputFile>,
    pub schema_hash: Option<String>,
}

impl Run {
    /// Creates `<out_dir>/<command>-<UTC timestamp>`, adding a suffix rather
    /// than reusing an existing directory.
    pub fn create(out_dir: &Path, command: &str) -> Result<Run, CliError> {
        let now = chrono::Utc::now();
        let stamp = now.format("%Y%m%dT%H%M%S%.3fZ").to_string();
        fs::create_dir_all(out_dir).map_err(|e| CliError::io(out_dir, e))?;
        let base = format!("{command}-{stamp}");
        let mut dir = out_dir.join(&base);
        let mut n = 1;
        loop {
            match fs::create_dir(&dir) {
                Ok(()) => break,
                Err(e) if e.kind() == std::io::ErrorKind::AlreadyExists => {
                    dir = out_dir.join(format!("{base}-{n}"));
                    n += 1;
                }
                Err(e) => return Err(CliError::io(&dir, e)),
            }
        }
        Ok(Run {
            dir,
            started: Instant::now(),
            started_at: now.to_rfc3339(),
            inputs: BTreeMap::new(),
            outputs: Vec::new(),
            schema_hash: None,
        })
    }

    pub fn record_input(&mut self, path: &Path) -> Result<(), CliError> {
        let h = hash_file(path)?;
        self.inputs.insert(path.display().to_string(), h);
        Ok(())
    }

    pub fn write_bytes(&mut self, name: &str, bytes: &[u8]) -> Result<PathBuf, CliError> {
        let path = self.dir.join(name);
        fs::write(&path, bytes).map_err(|e| CliError::io(&path, e))?;
        self.outputs.push(OutputFile {
            file: name.to_string(),
            sha256: sha256_hex(bytes),
        });
        Ok(path)
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<PathBuf, CliError> {
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        self.write_bytes(name, text.as_bytes())
    }

    pub fn finish(self, command: &str, argv: &[String], config: &RunConfig) -> Result<RunManifest, CliError> {
        let cwd = std::env::current_dir().map_err(|e| CliError::io(".", e))?;
        let manifest = RunManifest {
            command: command.to_string(),
            argv: argv.to_vec(),
            cwd,
            config: config.clone(),
            schema_hash: self.schema_hash,
            inputs: self.inputs,
            seed: config.seed,
            versions: Versions {
                embpred: env!("CARGO_PKG_VERSION").to_string(),
                manifest_format: 1,
            },
            started_at: self.started_at,
            wall_time_secs: self.started.elapsed().as_secs_f64(),
            outputs: self.outputs,
        };
        let path = self.dir.join(MANIFEST_FILE);
        let mut text = serde_json::to_string_pretty(&manifest)?;
        text.push('\n');
        fs::write(&path, text).map_err(|e| CliError::io(&path, e))?;
        Ok(manifest)
    }
}

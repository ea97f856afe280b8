//! Run directory, manifest and exit codes.

use std::fmt;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use sha2::{Digest, Sha256};
use spin_readout::export::{to_json, Table};
use spin_readout::fitting::FitError;
use spin_readout::Error;

pub const EXIT_INPUT: i32 = 2;
pub const EXIT_NUMERICAL: i32 = 3;
pub const EXIT_FIT: i32 = 4;

#[derive(Debug)]
pub struct CliError {
    pub code: i32,
    pub message: String,
}

impl CliError {
    pub fn input(message: impl Into<String>) -> Self {
        CliError {
            code: EXIT_INPUT,
            message: message.into(),
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match &e {
            Error::Config(_) | Error::InvalidParams(_) | Error::InvalidArgument(_) | Error::Io(_) => EXIT_INPUT,
            Error::Fit(f) => return f.clone().into(),
            _ => EXIT_NUMERICAL,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<FitError> for CliError {
    fn from(e: FitError) -> Self {
        let code = match &e {
            FitError::InvalidInput(_) => EXIT_INPUT,
            FitError::Model(_) => EXIT_NUMERICAL,
            FitError::NonConvergence { .. } | FitError::Unidentifiable(_) | FitError::WrongSign(_) => EXIT_FIT,
        };
        CliError {
            code,
            message: e.to_string(),
        }
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::input(e.to_string())
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes).iter().map(|b| format!("{b:02x}")).collect()
}

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config_path: Option<String>,
    pub config_sha256: Option<String>,
    pub seed: Option<u64>,
    pub outputs: Vec<String>,
    pub wall_time_s: f64,
    pub version: String,
    pub exit_code: i32,
    pub error: Option<String>,
}

/// An output directory that records every file written into it.
pub struct RunDir {
    dir: PathBuf,
    command: String,
    config: Option<(String, String)>,
    seed: Option<u64>,
    outputs: Vec<String>,
    started: Instant,
}

impl RunDir {
    pub fn create(dir: &Path, command: String) -> Result<Self, CliError> {
        std::fs::create_dir_all(dir).map_err(|e| CliError::input(format!("{}: {e}", dir.display())))?;
        Ok(RunDir {
            dir: dir.to_path_buf(),
            command,
            config: None,
            seed: None,
            outputs: Vec::new(),
            started: Instant::now(),
        })
    }

    pub fn set_config(&mut self, path: &Path, bytes: &[u8]) {
        self.config = Some((path.display().to_string(), sha256_hex(bytes)));
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = Some(seed);
    }

    pub fn write_text(&mut self, name: &str, text: &str) -> Result<(), CliError> {
        std::fs::write(self.dir.join(name), text)?;
        self.outputs.push(name.to_string());
        Ok(())
    }

    pub fn write_table(&mut self, name: &str, table: &Table) -> Result<(), CliError> {
        self.write_text(name, &table.to_csv())
    }

    pub fn write_json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<(), CliError> {
        self.write_text(name, &to_json(value))
    }

    /// Writes `manifest.json`, which lists itself among the outputs, and
    /// passes `outcome` through.
    pub fn finish(mut self, outcome: Result<(), CliError>) -> Result<(), CliError> {
        self.outputs.push("manifest.json".into());
        let (config_path, config_sha256) = match self.config.take() {
            Some((p, h)) => (Some(p), Some(h)),
            None => (None, None),
        };
        let manifest = RunManifest {
            command: self.command.clone(),
            config_path,
            config_sha256,
            seed: self.seed,
            outputs: self.outputs.clone(),
            wall_time_s: self.started.elapsed().as_secs_f64(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            exit_code: outcome.as_ref().map_or_else(|e| e.code, |_| 0),
            error: outcome.as_ref().err().map(|e| e.message.clone()),
        };
        std::fs::write(self.dir.join("manifest.json"), to_json(&manifest))?;
        outcome
    }
}

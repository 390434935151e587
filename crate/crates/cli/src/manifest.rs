//! Run manifests: the resolved command, input digests and timestamps.

use std::fs;
use std::path::{Path, PathBuf};
use std::time::{SystemTime, UNIX_EPOCH};

use serde::{Deserialize, Serialize};

use crate::args::Command;
use crate::commands::Outcome;
use crate::io::{digest64, file_digest};
use crate::{json, CliError};

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FileDigest {
    pub path: PathBuf,
    /// First 64 bits of the SHA-256 of the content, hex.
    pub digest: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    /// Every parameter after defaults are applied; replayable as is.
    pub params: Command,
    pub seed: Option<u64>,
    pub inputs: Vec<FileDigest>,
    pub artifacts: Vec<FileDigest>,
    pub stdout_digest: String,
    pub started_unix_ms: u64,
    pub finished_unix_ms: u64,
}

pub fn now_ms() -> u64 {
    SystemTime::now().duration_since(UNIX_EPOCH).map_or(0, |d| d.as_millis() as u64)
}

fn digests(paths: &[PathBuf]) -> Result<Vec<FileDigest>, CliError> {
    paths.iter().map(|p| Ok(FileDigest { path: p.clone(), digest: file_digest(p)? })).collect()
}

impl RunManifest {
    pub fn new(command: &Command, outcome: &Outcome, stdout: &str, started_unix_ms: u64) -> Result<Self, CliError> {
        Ok(Self {
            command: command.name().to_string(),
            version: env!("CARGO_PKG_VERSION").to_string(),
            params: command.clone(),
            seed: command.seed(),
            inputs: digests(&outcome.inputs)?,
            artifacts: digests(&outcome.artifacts)?,
            stdout_digest: digest64(stdout.as_bytes()),
            started_unix_ms,
            finished_unix_ms: now_ms(),
        })
    }

    /// Writes to `path`, or as one line on standard error.
    pub fn emit(&self, path: Option<&Path>) -> Result<(), CliError> {
        let text = json::to_string(self);
        match path {
            Some(p) => fs::write(p, format!("{text}\n"))
                .map_err(|e| CliError::usage(format!("cannot write manifest {}: {e}", p.display()))),
            None => {
                eprintln!("{text}");
                Ok(())
            }
        }
    }
}

/// The recorded command, after checking that its inputs are unchanged, and
/// the digest its output must reproduce.
pub fn load_for_replay(path: &Path, force: bool) -> Result<(Command, String), CliError> {
    let text = fs::read_to_string(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    let m: RunManifest = serde_json::from_str(&text)
        .map_err(|e| CliError::usage(format!("{} is not a run manifest: {e}", path.display())))?;
    if m.version != env!("CARGO_PKG_VERSION") {
        eprintln!("warning: manifest written by version {}, replaying with {}", m.version, env!("CARGO_PKG_VERSION"));
    }
    for input in &m.inputs {
        let now = file_digest(&input.path)?;
        if now != input.digest {
            return Err(CliError::usage(format!(
                "input {} changed since the recorded run (digest {now}, recorded {})",
                input.path.display(),
                input.digest
            )));
        }
    }
    let mut cmd = m.params;
    if let Command::Simulate(a) = &mut cmd {
        a.force |= force;
    }
    Ok((cmd, m.stdout_digest))
}

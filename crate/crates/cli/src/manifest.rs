//! Run manifests: every pipeline command records its resolved parameters,
//! input hashes, and output hashes so a run can be reproduced bit-exactly
//! from the manifest alone. Manifests carry no timestamps or machine state;
//! two identical runs produce identical manifests.

use crate::error::{io_at, CliError, Result};
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub tool: String,
    pub version: String,
    /// Subcommand that produced this run.
    pub command: String,
    /// Fully resolved parameters, including any config file inlined.
    pub params: serde_json::Value,
    /// Input file hashes (sha256), keyed by the path as given.
    pub inputs: BTreeMap<String, String>,
    /// Output file hashes (sha256), keyed by path relative to the run dir.
    pub outputs: BTreeMap<String, String>,
}

impl Manifest {
    pub fn new(command: &str, params: serde_json::Value) -> Self {
        Self {
            tool: "switof".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            params,
            inputs: BTreeMap::new(),
            outputs: BTreeMap::new(),
        }
    }

    pub fn record_input(&mut self, path: &Path) -> Result<()> {
        self.inputs
            .insert(path.display().to_string(), sha256_file(path)?);
        Ok(())
    }

    /// Hash an output file, keyed relative to the run directory.
    pub fn record_output(&mut self, run_dir: &Path, path: &Path) -> Result<()> {
        let key = path
            .strip_prefix(run_dir)
            .unwrap_or(path)
            .display()
            .to_string();
        self.outputs.insert(key, sha256_file(path)?);
        Ok(())
    }

    pub fn write(&self, run_dir: &Path) -> Result<PathBuf> {
        let path = run_dir.join(MANIFEST_NAME);
        let json = serde_json::to_string_pretty(self)
            .map_err(|e| CliError::Data(format!("manifest serialization: {e}")))?;
        crate::grid::write_atomic(&path, json.as_bytes())?;
        Ok(path)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = io_at(path, std::fs::read_to_string(path))?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Data(format!("{}: {e}", path.display())))
    }
}

pub fn sha256_file(path: &Path) -> Result<String> {
    let bytes = io_at(path, std::fs::read(path))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::{CliError, Command};

pub const MANIFEST_FILE: &str = "manifest.toml";

/// Everything needed to repeat a run: the fully materialized command, the
/// seed and digests of the input files. Carries no timestamps or output
/// locations, so repeating a run reproduces the manifest too.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    pub inputs: Vec<InputDigest>,
    pub command: Command,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct InputDigest {
    pub path: PathBuf,
    pub sha256: String,
}

pub fn sha256_file(path: &Path) -> Result<String, CliError> {
    let bytes = std::fs::read(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

impl RunManifest {
    pub fn new(command: &Command, seed: u64, inputs: &[PathBuf]) -> Result<Self, CliError> {
        Ok(RunManifest {
            tool: env!("CARGO_PKG_NAME").to_owned(),
            version: env!("CARGO_PKG_VERSION").to_owned(),
            subcommand: command.name().to_owned(),
            seed,
            inputs: inputs
                .iter()
                .map(|p| Ok(InputDigest { path: p.clone(), sha256: sha256_file(p)? }))
                .collect::<Result<_, CliError>>()?,
            command: command.clone(),
        })
    }

    pub fn to_toml(&self) -> Result<String, CliError> {
        toml::to_string(self).map_err(|e| CliError::new("io", format!("cannot encode manifest: {e}")))
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path).map_err(|e| CliError::new("io", format!("{}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::new("parse", format!("{}: {e}", path.display())))
    }

    /// Fails if this build or any input differs from the recorded run.
    pub fn verify(&self) -> Result<(), CliError> {
        if self.version != env!("CARGO_PKG_VERSION") {
            return Err(CliError::new(
                "validation",
                format!("manifest written by version {}, this is {}", self.version, env!("CARGO_PKG_VERSION")),
            ));
        }
        for input in &self.inputs {
            let now = sha256_file(&input.path)?;
            if now != input.sha256 {
                return Err(CliError::new(
                    "validation",
                    format!("{} changed since the recorded run", input.path.display()),
                ));
            }
        }
        Ok(())
    }
}

impl Command {
    pub fn name(&self) -> &'static str {
        match self {
            Command::Characterize(_) => "characterize",
            Command::Forecast(_) => "forecast",
            Command::Optimize(_) => "optimize",
            Command::Simulate(_) => "simulate",
            Command::Compare(_) => "compare",
            Command::Rerun(_) => "rerun",
        }
    }
}

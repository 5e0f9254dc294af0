//! Batch commands for the DEM correction pipeline.

pub mod commands;
pub mod config;
pub mod pipeline;

use std::path::Path;

use serde::Serialize;
use sha2::{Digest, Sha256};

pub use config::{CellSet, ModelKind, PipelineConfig};

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    /// Bad configuration or input data.
    #[error("{0}")]
    Input(String),
    #[error("{0}")]
    Internal(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 2,
            CliError::Internal(_) => 1,
        }
    }
}

impl From<demcorrect_core::Error> for CliError {
    fn from(e: demcorrect_core::Error) -> Self {
        use demcorrect_core::Error as E;
        match e {
            E::Io(_) | E::Csv(_) => CliError::Internal(e.to_string()),
            _ => CliError::Input(e.to_string()),
        }
    }
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, serde::Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub command: String,
    pub config_sha256: String,
}

impl Provenance {
    pub fn new(command: &str, cfg: &PipelineConfig) -> Self {
        Self {
            tool: "demcorrect".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            config_sha256: cfg.digest(),
        }
    }
}

pub(crate) fn write_bytes(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent() {
        std::fs::create_dir_all(dir)
            .map_err(|e| CliError::Internal(format!("cannot create {}: {e}", dir.display())))?;
    }
    std::fs::write(path, bytes).map_err(|e| CliError::Internal(format!("cannot write {}: {e}", path.display())))
}

/// Pretty JSON with the provenance block added at the top level.
pub(crate) fn write_json(path: &Path, body: &impl Serialize, prov: &Provenance) -> Result<(), CliError> {
    let mut value = serde_json::to_value(body).map_err(|e| CliError::Internal(e.to_string()))?;
    match value.as_object_mut() {
        Some(obj) => {
            obj.insert(
                "provenance".into(),
                serde_json::to_value(prov).map_err(|e| CliError::Internal(e.to_string()))?,
            );
        }
        None => return Err(CliError::Internal("output document is not a JSON object".into())),
    }
    let mut text = serde_json::to_string_pretty(&value).map_err(|e| CliError::Internal(e.to_string()))?;
    text.push('\n');
    write_bytes(path, text.as_bytes())
}

/// Caps rayon's global pool from `DEMCORRECT_THREADS` when set.
pub fn init_threads() -> Result<(), CliError> {
    let Ok(raw) = std::env::var("DEMCORRECT_THREADS") else { return Ok(()) };
    let n: usize = raw
        .trim()
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| CliError::Input(format!("DEMCORRECT_THREADS must be a positive integer, got `{raw}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| CliError::Internal(e.to_string()))
}

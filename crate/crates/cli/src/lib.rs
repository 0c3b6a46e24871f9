//! Configuration-driven runner for the coupled solver: scenario files,
//! the bundled catalog, and the output tree each run produces.

// `!(x > 0)` is used on purpose: it also rejects NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod catalog;
pub mod config;
pub mod output;
pub mod problem;
pub mod run;

use std::path::Path;

use thiserror::Error;

pub use config::{parse_scenario, ConfigError, Scenario};
pub use run::{run, RunOptions, RunSummary};

#[derive(Debug, Error)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Core(#[from] thermovisc::Error),
    #[error("i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("json: {0}")]
    Json(#[from] serde_json::Error),
    #[error("{0}")]
    Other(String),
}

impl CliError {
    /// Process exit code: 2 for a non-converged fixed point, 1 otherwise.
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Core(thermovisc::Error::NotConverged(_)) => 2,
            _ => 1,
        }
    }
}

/// Loads `builtin:<name>` from the catalog or a scenario file from disk.
pub fn load_scenario(spec: &str) -> Result<Scenario, CliError> {
    if let Some(name) = spec.strip_prefix("builtin:") {
        let entry = catalog::find(name)
            .ok_or_else(|| CliError::Other(format!("no bundled scenario `{name}`")))?;
        return Ok(parse_scenario(entry.text, entry.name, Path::new("."))?);
    }
    let path = Path::new(spec);
    let text = std::fs::read_to_string(path)?;
    let dir = path.parent().unwrap_or(Path::new("."));
    let stem = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| spec.to_string());
    Ok(parse_scenario(&text, &stem, dir)?)
}

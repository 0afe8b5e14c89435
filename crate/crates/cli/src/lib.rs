//! Experiment runner: parses a declarative config, dispatches to the model
//! crate, and writes a CSV table plus a JSON sidecar.

pub mod config;
pub mod experiments;
pub mod output;

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde_json::{json, Value};

pub use config::{parse_config, parse_config_with, Experiment, Overrides, RunConfig};
pub use experiments::{execute, RunOutput};

/// Process exit codes.
pub const EXIT_OK: i32 = 0;
pub const EXIT_IO: i32 = 1;
pub const EXIT_CONFIG: i32 = 2;
pub const EXIT_NUMERIC: i32 = 3;

#[derive(Debug)]
pub enum CliError {
    Config(config::ConfigErrors),
    Numeric(nvhp_core::Error),
    Io(std::io::Error),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => EXIT_CONFIG,
            CliError::Numeric(_) => EXIT_NUMERIC,
            CliError::Io(_) => EXIT_IO,
        }
    }

    /// Machine-readable form written to stderr.
    pub fn to_json(&self) -> Value {
        match self {
            CliError::Config(e) => json!({ "error": "config", "details": e.0 }),
            CliError::Numeric(e) => json!({ "error": "numeric", "message": e.to_string() }),
            CliError::Io(e) => json!({ "error": "io", "message": e.to_string() }),
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(e) => write!(f, "invalid config:\n{e}"),
            CliError::Numeric(e) => write!(f, "numeric failure: {e}"),
            CliError::Io(e) => write!(f, "i/o failure: {e}"),
        }
    }
}

impl std::error::Error for CliError {}

pub struct Report {
    pub csv: PathBuf,
    pub json: PathBuf,
    pub rows: usize,
    pub wall_clock_s: f64,
}

/// Parses, runs and writes one experiment into the config's `output` directory.
pub fn run_file(
    path: &Path,
    expected: Option<Experiment>,
    ov: &Overrides,
) -> Result<Report, CliError> {
    let text = std::fs::read_to_string(path).map_err(CliError::Io)?;
    let cfg = parse_config_with(&text, ov).map_err(CliError::Config)?;
    if let Some(e) = expected {
        if e != cfg.experiment {
            return Err(CliError::Config(config::ConfigErrors(vec![
                config::ConfigError {
                    kind: config::ErrorKind::OutOfRange,
                    field: "experiment".into(),
                    message: format!(
                        "config declares `{}` but `{e}` was requested",
                        cfg.experiment
                    ),
                },
            ])));
        }
    }
    run_config(&cfg)
}

pub fn run_config(cfg: &RunConfig) -> Result<Report, CliError> {
    let start = Instant::now();
    let out = execute(cfg).map_err(CliError::Numeric)?;
    let wall = start.elapsed().as_secs_f64();
    let w = output::write_outputs(
        Path::new(&cfg.output),
        &out.table,
        cfg,
        &out.diagnostics,
        wall,
    )
    .map_err(CliError::Io)?;
    Ok(Report {
        csv: w.csv,
        json: w.json,
        rows: out.table.len(),
        wall_clock_s: wall,
    })
}

//! Experiment runner: reads a flat JSON config, runs one experiment on a
//! dedicated worker pool and writes CSV tables with JSON sidecars.

pub mod config;
pub mod experiments;
pub mod output;

use std::fmt;
use std::path::{Path, PathBuf};

use reloc_ldp::{Error, Model};

use crate::config::ExperimentConfig;
use crate::experiments::{check_keys, lookup};
use crate::output::{write_tables, Table};

pub const WORKERS_ENV: &str = "RELOC_LDP_WORKERS";

#[derive(Debug, Clone, PartialEq)]
pub enum CliError {
    /// The config is unusable; exit code 2.
    Invalid(String),
    /// A numeric or I/O failure while running; exit code 3.
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => 2,
            CliError::Runtime(_) => 3,
        }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            CliError::Invalid(m) => write!(f, "invalid config: {m}"),
            CliError::Runtime(m) => write!(f, "run failed: {m}"),
        }
    }
}

impl std::error::Error for CliError {}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        match e {
            Error::Domain(_) | Error::Assumption { .. } | Error::Unsupported(_) => CliError::Invalid(e.to_string()),
            _ => CliError::Runtime(e.to_string()),
        }
    }
}

/// Parses, builds the model and checks the experiment settings.
pub fn validate(cfg: &ExperimentConfig) -> Result<Model, CliError> {
    let exp = lookup(&cfg.experiment)?;
    check_keys(exp.as_ref(), &cfg.settings)?;
    let model = cfg.model()?;
    exp.validate(cfg, &model)?;
    Ok(model)
}

/// Explicit count, then the config, then `RELOC_LDP_WORKERS`, then all cores.
pub fn resolve_workers(flag: Option<usize>, cfg: &ExperimentConfig) -> Result<usize, CliError> {
    if let Some(w) = flag.or(cfg.workers) {
        return if w == 0 {
            Err(CliError::Invalid("worker count must be positive".into()))
        } else {
            Ok(w)
        };
    }
    match std::env::var(WORKERS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .ok()
            .filter(|w| *w > 0)
            .ok_or_else(|| CliError::Invalid(format!("{WORKERS_ENV} must be a positive integer, got '{v}'"))),
        Err(_) => Ok(std::thread::available_parallelism().map_or(1, |n| n.get())),
    }
}

/// Runs the experiment on a pool of `workers` threads and returns its tables.
pub fn run_tables(cfg: &ExperimentConfig, workers: usize) -> Result<Vec<Table>, CliError> {
    let model = validate(cfg)?;
    let exp = lookup(&cfg.experiment)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| CliError::Runtime(format!("cannot start worker pool: {e}")))?;
    pool.install(|| exp.run(cfg, &model))
}

/// Runs and writes; returns the paths written.
pub fn run(cfg: &ExperimentConfig, workers: Option<usize>, out: Option<&Path>) -> Result<Vec<PathBuf>, CliError> {
    let workers = resolve_workers(workers, cfg)?;
    let dir = out
        .map(Path::to_path_buf)
        .or_else(|| cfg.output.as_ref().map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."));
    let tables = run_tables(cfg, workers)?;
    write_tables(&dir, &tables, cfg)
}

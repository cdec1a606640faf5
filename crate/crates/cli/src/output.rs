//! CSV tables and their JSON sidecars.

use std::fs;
use std::path::{Path, PathBuf};

use serde_json::{json, Value};

use crate::config::ExperimentConfig;
use crate::CliError;

/// Bumped whenever a header changes.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Float(f64),
    Int(u64),
    Text(String),
    Bool(bool),
    Empty,
}

impl Cell {
    /// Shortest string that parses back to the same value; NaN is left blank.
    pub fn render(&self) -> String {
        match self {
            Cell::Float(x) if x.is_nan() => String::new(),
            Cell::Float(x) => format!("{x:?}"),
            Cell::Int(n) => n.to_string(),
            Cell::Text(s) => s.clone(),
            Cell::Bool(b) => b.to_string(),
            Cell::Empty => String::new(),
        }
    }
}

impl From<f64> for Cell {
    fn from(x: f64) -> Self {
        Cell::Float(x)
    }
}

impl From<u64> for Cell {
    fn from(n: u64) -> Self {
        Cell::Int(n)
    }
}

impl From<usize> for Cell {
    fn from(n: usize) -> Self {
        Cell::Int(n as u64)
    }
}

impl From<bool> for Cell {
    fn from(b: bool) -> Self {
        Cell::Bool(b)
    }
}

impl From<&str> for Cell {
    fn from(s: &str) -> Self {
        Cell::Text(s.to_owned())
    }
}

impl From<String> for Cell {
    fn from(s: String) -> Self {
        Cell::Text(s)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub kind: &'static str,
    pub header: &'static [&'static str],
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(kind: &'static str, header: &'static [&'static str]) -> Self {
        Self {
            kind,
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        assert_eq!(row.len(), self.header.len(), "row width for {}", self.kind);
        self.rows.push(row);
    }

    pub fn to_csv(&self) -> Result<Vec<u8>, CliError> {
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_writer(Vec::new());
        let io = |e: csv::Error| CliError::Runtime(format!("csv encoding failed: {e}"));
        w.write_record(self.header).map_err(io)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render)).map_err(io)?;
        }
        w.into_inner()
            .map_err(|e| CliError::Runtime(format!("csv encoding failed: {e}")))
    }

    pub fn metadata(&self, cfg: &ExperimentConfig) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "kind": self.kind,
            "experiment": cfg.experiment,
            "columns": self.header,
            "rows": self.rows.len(),
            "library_version": env!("CARGO_PKG_VERSION"),
            "seeds": { "master": cfg.master_seed, "env": cfg.env_seed },
            "config": cfg.to_json(),
        })
    }
}

/// Writes `<kind>.csv` and `<kind>.meta.json` for every table.
pub fn write_tables(dir: &Path, tables: &[Table], cfg: &ExperimentConfig) -> Result<Vec<PathBuf>, CliError> {
    let io = |p: &Path, e: std::io::Error| CliError::Runtime(format!("cannot write {}: {e}", p.display()));
    fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
    let mut written = Vec::new();
    for t in tables {
        let csv_path = dir.join(format!("{}.csv", t.kind));
        fs::write(&csv_path, t.to_csv()?).map_err(|e| io(&csv_path, e))?;
        let meta_path = dir.join(format!("{}.meta.json", t.kind));
        let mut meta = serde_json::to_string_pretty(&t.metadata(cfg)).expect("metadata serializes");
        meta.push('\n');
        fs::write(&meta_path, meta).map_err(|e| io(&meta_path, e))?;
        written.push(csv_path);
        written.push(meta_path);
    }
    Ok(written)
}

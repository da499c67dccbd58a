//! Experiment driver: one validated [`RunConfig`] in, sorted CSV tables and a
//! JSON manifest out.

mod config;
mod run;
mod tables;

use std::cmp::Ordering;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

pub use config::{AnchorChoice, ExperimentKind, Grid, GridRange, RunConfig, Spacing};
pub use tables::render_tables;

use crate::error::{Error, Result};

pub const MANIFEST: &str = "manifest.json";

#[derive(Clone, Debug, PartialEq)]
pub enum Cell {
    Int(i64),
    Num(f64),
    Text(String),
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            // shortest representations that round-trip
            Cell::Num(v) if *v != 0.0 && (v.abs() < 1e-3 || v.abs() >= 1e7) => format!("{v:e}"),
            Cell::Num(v) => v.to_string(),
            Cell::Text(s) => s.clone(),
        }
    }

    fn cmp_key(&self, other: &Cell) -> Ordering {
        match (self, other) {
            (Cell::Int(a), Cell::Int(b)) => a.cmp(b),
            (Cell::Num(a), Cell::Num(b)) => a.total_cmp(b),
            (Cell::Text(a), Cell::Text(b)) => a.cmp(b),
            _ => self.render().cmp(&other.render()),
        }
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Num(v)
    }
}
impl From<i64> for Cell {
    fn from(v: i64) -> Self {
        Cell::Int(v)
    }
}
impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<u64> for Cell {
    fn from(v: u64) -> Self {
        Cell::Int(v as i64)
    }
}
impl From<&str> for Cell {
    fn from(v: &str) -> Self {
        Cell::Text(v.to_string())
    }
}
impl From<String> for Cell {
    fn from(v: String) -> Self {
        Cell::Text(v)
    }
}

/// One CSV file. Rows are sorted on the first `key_columns` cells before
/// writing, so the bytes do not depend on task scheduling.
#[derive(Clone, Debug)]
pub struct Table {
    pub name: String,
    pub header: Vec<String>,
    pub key_columns: usize,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(name: &str, header: &[&str], key_columns: usize) -> Self {
        Self {
            name: name.to_string(),
            header: header.iter().map(|s| s.to_string()).collect(),
            key_columns,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }

    fn sort(&mut self) {
        let k = self.key_columns;
        self.rows.sort_by(|a, b| {
            a.iter()
                .zip(b)
                .take(k)
                .map(|(x, y)| x.cmp_key(y))
                .find(|o| o.is_ne())
                .unwrap_or(Ordering::Equal)
        });
    }

    fn write(&mut self, dir: &Path) -> Result<PathBuf> {
        self.sort();
        let path = dir.join(format!("{}.csv", self.name));
        let mut w = csv::Writer::from_path(&path)?;
        w.write_record(&self.header)?;
        for row in &self.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        Ok(path)
    }
}

/// Everything an experiment produces.
#[derive(Debug, Default)]
pub struct Outcome {
    pub tables: Vec<Table>,
    /// Extra JSON documents, such as full histograms.
    pub documents: Vec<(String, serde_json::Value)>,
    /// Binary field snapshots `(file stem, values)`.
    pub snapshots: Vec<(String, Vec<f64>)>,
    pub warnings: Vec<String>,
}

#[derive(Debug, Serialize)]
pub struct Manifest {
    pub experiment: String,
    pub version: String,
    pub config: RunConfig,
    pub seconds: f64,
    pub files: Vec<String>,
    pub warnings: Vec<String>,
}

fn check_output_dir(cfg: &RunConfig) -> Result<()> {
    let manifest = cfg.output.join(MANIFEST);
    if manifest.exists() {
        let old: serde_json::Value = serde_json::from_str(&fs::read_to_string(&manifest)?)?;
        let mine = serde_json::to_value(cfg)?;
        if old.get("config") != Some(&mine) {
            return Err(Error::Config(format!(
                "field `output`: {} holds results of a different configuration",
                cfg.output.display()
            )));
        }
    } else if cfg.output.exists() && fs::read_dir(&cfg.output)?.next().is_some() {
        return Err(Error::Config(format!(
            "field `output`: {} is not empty and has no manifest",
            cfg.output.display()
        )));
    }
    Ok(())
}

/// Runs one experiment and writes its artifacts into `cfg.output`. A directory
/// may only be reused by a rerun of the identical configuration.
pub fn run_experiment(cfg: &RunConfig) -> Result<Manifest> {
    cfg.validate()?;
    check_output_dir(cfg)?;
    let start = Instant::now();
    let mut outcome = run::dispatch(cfg)?;
    fs::create_dir_all(&cfg.output)?;
    let mut files = Vec::new();
    for t in &mut outcome.tables {
        t.write(&cfg.output)?;
        files.push(format!("{}.csv", t.name));
    }
    for (name, doc) in &outcome.documents {
        let file = format!("{name}.json");
        fs::write(cfg.output.join(&file), serde_json::to_string_pretty(doc)?)?;
        files.push(file);
    }
    for (stem, values) in &outcome.snapshots {
        let file = format!("{stem}.f64");
        crate::gaussian::write_f64_le(&cfg.output.join(&file), values)?;
        files.push(file);
    }
    let manifest = Manifest {
        experiment: cfg.experiment.name().to_string(),
        version: env!("CARGO_PKG_VERSION").to_string(),
        config: cfg.clone(),
        seconds: start.elapsed().as_secs_f64(),
        files,
        warnings: outcome.warnings,
    };
    fs::write(
        cfg.output.join(MANIFEST),
        serde_json::to_string_pretty(&manifest)?,
    )?;
    Ok(manifest)
}

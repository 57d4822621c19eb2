//! Report files: `<experiment>_<model>_<timestamp>.{json,csv}` plus a
//! `.manifest.json` echoing the resolved configuration.
//!
//! Only file names carry the run time, so identical configurations produce
//! byte-identical file contents.

use std::fs;
use std::path::{Path, PathBuf};

use anyhow::Context;
use serde::Serialize;

use crate::config::ExperimentConfig;

/// One CSV cell.
#[derive(Debug, Clone, PartialEq)]
pub enum Cell {
    Int(u64),
    Float(f64),
    Missing,
}

impl From<usize> for Cell {
    fn from(v: usize) -> Self {
        Cell::Int(v as u64)
    }
}

impl From<f64> for Cell {
    fn from(v: f64) -> Self {
        Cell::Float(v)
    }
}

impl From<Option<f64>> for Cell {
    fn from(v: Option<f64>) -> Self {
        v.map_or(Cell::Missing, Cell::Float)
    }
}

impl From<Option<usize>> for Cell {
    fn from(v: Option<usize>) -> Self {
        v.map_or(Cell::Missing, Cell::from)
    }
}

/// Seventeen significant digits, enough to round-trip any `f64`.
pub fn format_float(x: f64) -> String {
    if x.is_finite() {
        format!("{x:.16e}")
    } else if x.is_nan() {
        "nan".into()
    } else if x > 0.0 {
        "inf".into()
    } else {
        "-inf".into()
    }
}

impl Cell {
    fn render(&self) -> String {
        match self {
            Cell::Int(v) => v.to_string(),
            Cell::Float(v) => format_float(*v),
            Cell::Missing => String::new(),
        }
    }
}

/// A CSV table with a mandatory header.
#[derive(Debug, Clone, PartialEq)]
pub struct Table {
    pub header: Vec<&'static str>,
    pub rows: Vec<Vec<Cell>>,
}

impl Table {
    pub fn new(header: Vec<&'static str>) -> Self {
        Self {
            header,
            rows: Vec::new(),
        }
    }

    pub fn push(&mut self, row: Vec<Cell>) {
        debug_assert_eq!(row.len(), self.header.len());
        self.rows.push(row);
    }
}

/// Output directory: the `--out` flag, then the config, then `NHIM_OUT`,
/// then the working directory.
pub fn resolve_dir(flag: Option<&Path>, config: &ExperimentConfig) -> PathBuf {
    flag.map(Path::to_path_buf)
        .or_else(|| config.out.clone())
        .or_else(|| std::env::var_os("NHIM_OUT").map(PathBuf::from))
        .unwrap_or_else(|| PathBuf::from("."))
}

/// The files of one run, sharing a stem.
#[derive(Debug, Clone)]
pub struct RunFiles {
    dir: PathBuf,
    stem: String,
    written: Vec<String>,
}

#[derive(Serialize)]
struct Manifest<'a> {
    tool: &'static str,
    version: &'static str,
    experiment: &'a str,
    model: &'a str,
    seed: u64,
    exit_code: u8,
    /// Extensions of the report files sharing this manifest's stem.
    outputs: &'a [String],
    config: &'a ExperimentConfig,
}

impl RunFiles {
    /// Create the directory and pick a stem not used by an earlier run.
    pub fn create(dir: &Path, experiment: &str, model: &str) -> anyhow::Result<Self> {
        fs::create_dir_all(dir)
            .with_context(|| format!("creating output directory {}", dir.display()))?;
        let stamp = chrono::Utc::now().format("%Y%m%dT%H%M%S%3fZ");
        let base = format!("{experiment}_{model}_{stamp}");
        let taken = |stem: &str| dir.join(format!("{stem}.manifest.json")).exists();
        let mut stem = base.clone();
        let mut n = 1;
        while taken(&stem) {
            stem = format!("{base}-{n}");
            n += 1;
        }
        Ok(Self {
            dir: dir.to_path_buf(),
            stem,
            written: Vec::new(),
        })
    }

    pub fn stem(&self) -> &str {
        &self.stem
    }

    pub fn path(&self, ext: &str) -> PathBuf {
        self.dir.join(format!("{}.{ext}", self.stem))
    }

    pub fn write_json<T: Serialize>(&mut self, value: &T) -> anyhow::Result<PathBuf> {
        let path = self.path("json");
        let mut text = serde_json::to_string_pretty(value)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        self.written.push("json".into());
        Ok(path)
    }

    pub fn write_csv(&mut self, table: &Table) -> anyhow::Result<PathBuf> {
        let path = self.path("csv");
        let mut w = csv::WriterBuilder::new()
            .terminator(csv::Terminator::Any(b'\n'))
            .from_path(&path)
            .with_context(|| format!("writing {}", path.display()))?;
        w.write_record(&table.header)?;
        for row in &table.rows {
            w.write_record(row.iter().map(Cell::render))?;
        }
        w.flush()?;
        self.written.push("csv".into());
        Ok(path)
    }

    pub fn write_manifest(
        &self,
        experiment: &str,
        model: &str,
        exit_code: u8,
        config: &ExperimentConfig,
    ) -> anyhow::Result<PathBuf> {
        let path = self.path("manifest.json");
        let m = Manifest {
            tool: env!("CARGO_PKG_NAME"),
            version: env!("CARGO_PKG_VERSION"),
            experiment,
            model,
            seed: config.seed,
            exit_code,
            outputs: &self.written,
            config,
        };
        let mut text = serde_json::to_string_pretty(&m)?;
        text.push('\n');
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
        Ok(path)
    }
}

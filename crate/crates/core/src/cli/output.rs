//! CSV and JSON report files. Every CSV gets a `<name>.meta.json` sidecar
//! carrying the schema version, configuration hash, versions and wall time.

use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;
use serde_json::json;

use crate::error::{Error, Result};

pub const META_SCHEMA: &str = "1";

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Format {
    Csv,
    Json,
    #[default]
    Both,
}

impl Format {
    fn csv(self) -> bool {
        matches!(self, Format::Csv | Format::Both)
    }

    fn json(self) -> bool {
        matches!(self, Format::Json | Format::Both)
    }
}

fn io(path: &Path, e: impl std::fmt::Display) -> Error {
    Error::InvalidArgument(format!("{}: {e}", path.display()))
}

pub(crate) struct Outputs {
    dir: PathBuf,
    format: Format,
    command: &'static str,
    config_hash: String,
    seed: Option<u64>,
    workers: usize,
    start: Instant,
    pub written: Vec<PathBuf>,
}

impl Outputs {
    pub fn new(dir: &Path, format: Format, command: &'static str, config_hash: String, seed: Option<u64>, workers: usize) -> Result<Self> {
        std::fs::create_dir_all(dir).map_err(|e| io(dir, e))?;
        Ok(Self { dir: dir.to_path_buf(), format, command, config_hash, seed, workers, start: Instant::now(), written: Vec::new() })
    }

    /// Writes `<name>.csv` and its sidecar (skipped for `--format json`).
    pub fn csv(&mut self, name: &str, header: &[String], rows: &[Vec<String>]) -> Result<()> {
        if !self.format.csv() {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        let mut w = csv::Writer::from_path(&path).map_err(|e| io(&path, e))?;
        w.write_record(header).map_err(|e| io(&path, e))?;
        for r in rows {
            w.write_record(r).map_err(|e| io(&path, e))?;
        }
        w.flush().map_err(|e| io(&path, e))?;
        self.written.push(path);
        self.sidecar(name, rows.len())
    }

    /// Writes pre-rendered CSV text and its sidecar.
    pub fn csv_text(&mut self, name: &str, text: &str, rows: usize) -> Result<()> {
        if !self.format.csv() {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.csv"));
        std::fs::write(&path, text).map_err(|e| io(&path, e))?;
        self.written.push(path);
        self.sidecar(name, rows)
    }

    fn sidecar(&mut self, name: &str, rows: usize) -> Result<()> {
        let path = self.dir.join(format!("{name}.csv.meta.json"));
        let meta = json!({
            "schema": META_SCHEMA,
            "command": self.command,
            "file": format!("{name}.csv"),
            "rows": rows,
            "config_hash": self.config_hash,
            "seed": self.seed,
            "workers": self.workers,
            "versions": { "parcap": env!("CARGO_PKG_VERSION") },
            "wall_time_s": self.start.elapsed().as_secs_f64(),
        });
        let text = serde_json::to_string_pretty(&meta).expect("metadata serialises");
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    /// Writes `<name>.json` (skipped for `--format csv`).
    pub fn json<T: Serialize>(&mut self, name: &str, value: &T) -> Result<()> {
        if !self.format.json() {
            return Ok(());
        }
        let path = self.dir.join(format!("{name}.json"));
        let text = serde_json::to_string_pretty(value).map_err(|e| io(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io(&path, e))?;
        self.written.push(path);
        Ok(())
    }

    pub fn elapsed(&self) -> f64 {
        self.start.elapsed().as_secs_f64()
    }
}

/// Shortest round-trip rendering, used for every float in a CSV.
pub(crate) fn num(v: f64) -> String {
    format!("{v:e}")
}

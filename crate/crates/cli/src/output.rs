//! CSV and JSON writers with fixed headers and deterministic formatting.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::RunConfig;
use crate::error::CliError;

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io { path: path.display().to_string(), message: e.to_string() }
}

/// Writes `rows` under `header`; floats use the shortest round-trip form.
pub fn write_csv<I>(path: &Path, header: &[&str], rows: I) -> Result<(), CliError>
where
    I: IntoIterator<Item = Vec<String>>,
{
    let mut w = csv::Writer::from_path(path).map_err(|e| io_err(path, e))?;
    w.write_record(header).map_err(|e| io_err(path, e))?;
    for row in rows {
        w.write_record(&row).map_err(|e| io_err(path, e))?;
    }
    w.flush().map_err(|e| io_err(path, e))
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| io_err(path, e))?;
    text.push('\n');
    std::fs::write(path, text).map_err(|e| io_err(path, e))
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    std::fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

/// Reads a `t,value` series.
pub fn read_series(path: &Path) -> Result<Vec<f64>, CliError> {
    let bad = |m: String| CliError::Config(format!("{}: {m}", path.display()));
    let mut rdr = csv::Reader::from_path(path).map_err(|e| bad(e.to_string()))?;
    let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
    if headers.iter().collect::<Vec<_>>() != ["t", "value"] {
        return Err(bad("series must have header `t,value`".into()));
    }
    rdr.records()
        .map(|rec| {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            rec[1].trim().parse::<f64>().map_err(|e| bad(format!("bad value `{}`: {e}", &rec[1])))
        })
        .collect()
}

/// Everything needed to rerun a command bit-exactly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub tool: String,
    pub version: String,
    pub subcommand: String,
    pub seed: u64,
    /// The resolved configuration as TOML; parses back with `RunConfig::parse`.
    pub config: String,
    pub outputs: Vec<String>,
    pub details: serde_json::Value,
}

impl Provenance {
    pub fn new(subcommand: &str, cfg: &RunConfig, outputs: &[PathBuf], details: serde_json::Value) -> Self {
        Provenance {
            tool: "aggar".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            subcommand: subcommand.into(),
            seed: cfg.seed,
            config: cfg.to_toml(),
            outputs: outputs
                .iter()
                .map(|p| p.file_name().map_or_else(String::new, |f| f.to_string_lossy().into_owned()))
                .collect(),
            details,
        }
    }
}

pub fn num(v: f64) -> String {
    format!("{v}")
}

pub fn opt_num(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), num)
}

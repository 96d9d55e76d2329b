//! Per-cell trace files.

use std::fs;
use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::BenchError;

pub const TRACE_COLUMNS: [&str; 10] = [
    "run_id",
    "method",
    "stage",
    "iter",
    "f_gap",
    "grad_x_calls",
    "grad_y_calls",
    "hess_y_calls",
    "delta",
    "eps_tilde",
];

/// One traced iteration. Call counts are cumulative within the run; the last
/// row of a run holds its final gap and total cost.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TraceRow {
    pub run_id: String,
    pub method: String,
    pub stage: usize,
    pub iter: usize,
    pub f_gap: f64,
    pub grad_x_calls: u64,
    pub grad_y_calls: u64,
    pub hess_y_calls: u64,
    pub delta: f64,
    pub eps_tilde: f64,
}

fn io_error(path: &Path, e: impl std::fmt::Display) -> BenchError {
    BenchError::Io(format!("{}: {e}", path.display()))
}

pub fn to_csv(rows: &[TraceRow]) -> Result<Vec<u8>, BenchError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    // header even when there are no rows
    if rows.is_empty() {
        w.write_record(TRACE_COLUMNS).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    for r in rows {
        w.serialize(r).map_err(|e| BenchError::Io(e.to_string()))?;
    }
    w.into_inner().map_err(|e| BenchError::Io(e.to_string()))
}

/// Writes `bytes` to `path` through a temporary file in the same directory,
/// so readers never observe a partial file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<(), BenchError> {
    let dir = path.parent().unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))?;
    let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io_error(dir, e))?;
    tmp.write_all(bytes).map_err(|e| io_error(path, e))?;
    tmp.persist(path).map_err(|e| io_error(path, e.error))?;
    Ok(())
}

pub fn write_trace(path: &Path, rows: &[TraceRow]) -> Result<(), BenchError> {
    write_atomic(path, &to_csv(rows)?)
}

/// Reads a trace file, rejecting it when any of the fixed columns is missing.
pub fn read_trace(path: &Path) -> Result<Vec<TraceRow>, BenchError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| BenchError::Config {
        line: None,
        message: format!("cannot read trace {}: {e}", path.display()),
    })?;
    let headers = r.headers().map_err(|e| io_error(path, e))?.clone();
    let missing: Vec<&str> = TRACE_COLUMNS.iter().copied().filter(|c| !headers.iter().any(|h| h == *c)).collect();
    if !missing.is_empty() {
        return Err(BenchError::Config {
            line: Some(1),
            message: format!("trace {} is missing columns: {}", path.display(), missing.join(", ")),
        });
    }
    let mut rows = Vec::new();
    for (i, rec) in r.deserialize().enumerate() {
        rows.push(rec.map_err(|e| BenchError::Config {
            line: Some(i + 2),
            message: format!("trace {}: {e}", path.display()),
        })?);
    }
    Ok(rows)
}

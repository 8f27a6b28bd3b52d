//! CSV and JSON writers and readers.

use std::fs;
use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{Map, Value};
use thinfilm_core::functionals::DiagRecord;
use thinfilm_core::Field;

use crate::error::{io_error, CliError};

pub fn fmt_f64(v: f64) -> String {
    format!("{v:.16e}")
}

pub fn ensure_dir(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

pub fn write_diag(path: &Path, rows: &[DiagRecord]) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(DiagRecord::CSV_HEADER).map_err(|e| io_error(path, e))?;
    for r in rows {
        w.write_record(r.as_row().iter().map(|v| fmt_f64(*v))).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_diag(path: &Path) -> Result<Vec<DiagRecord>, CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = r.headers().map_err(|e| io_error(path, e))?.clone();
    if header.iter().ne(DiagRecord::CSV_HEADER.iter().copied()) {
        return Err(CliError::Config(format!("{}: unexpected diagnostics header", path.display())));
    }
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        let row = rec
            .iter()
            .map(|s| s.trim().parse::<f64>())
            .collect::<Result<Vec<_>, _>>()
            .map_err(|e| io_error(path, e))?;
        out.push(DiagRecord::from_row(&row)?);
    }
    Ok(out)
}

pub fn snapshot_name(index: usize) -> String {
    format!("snap_{index:04}.csv")
}

pub fn write_profile(path: &Path, field: &Field) -> Result<(), CliError> {
    let mut w = csv::Writer::from_path(path).map_err(|e| io_error(path, e))?;
    w.write_record(["x", "u"]).map_err(|e| io_error(path, e))?;
    for (x, u) in field.grid().nodes().iter().zip(field.values()) {
        w.write_record([fmt_f64(*x), fmt_f64(*u)]).map_err(|e| io_error(path, e))?;
    }
    w.flush().map_err(|e| io_error(path, e))
}

pub fn read_profile(path: &Path) -> Result<(Vec<f64>, Vec<f64>), CliError> {
    let mut r = csv::Reader::from_path(path).map_err(|e| io_error(path, e))?;
    let header = r.headers().map_err(|e| io_error(path, e))?.clone();
    if header.iter().ne(["x", "u"]) {
        return Err(CliError::Config(format!("{}: expected columns x,u", path.display())));
    }
    let (mut xs, mut us) = (Vec::new(), Vec::new());
    for rec in r.records() {
        let rec = rec.map_err(|e| io_error(path, e))?;
        let parse = |i: usize| -> Result<f64, CliError> {
            rec.get(i).unwrap_or("").trim().parse::<f64>().map_err(|e| io_error(path, e))
        };
        xs.push(parse(0)?);
        us.push(parse(1)?);
    }
    Ok((xs, us))
}

/// Diagnostics row as a JSON object keyed by the CSV column names.
pub fn diag_json(r: &DiagRecord) -> Value {
    let mut m = Map::new();
    for (k, v) in DiagRecord::CSV_HEADER.iter().zip(r.as_row()) {
        m.insert((*k).to_string(), json_f64(v));
    }
    Value::Object(m)
}

/// Non-finite numbers become `null`.
pub fn json_f64(v: f64) -> Value {
    serde_json::Number::from_f64(v).map(Value::Number).unwrap_or(Value::Null)
}

pub fn write_json(path: &Path, value: &impl Serialize) -> Result<(), CliError> {
    let mut text = serde_json::to_string_pretty(value).map_err(|e| CliError::Numerical(e.to_string()))?;
    text.push('\n');
    fs::write(path, text).map_err(|e| io_error(path, e))
}

/// Snapshot files of a run directory in index order.
pub fn snapshot_files(dir: &Path) -> Result<Vec<PathBuf>, CliError> {
    let mut files: Vec<PathBuf> = fs::read_dir(dir)
        .map_err(|e| io_error(dir, e))?
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| {
            p.file_name()
                .and_then(|n| n.to_str())
                .is_some_and(|n| n.starts_with("snap_") && n.ends_with(".csv"))
        })
        .collect();
    files.sort();
    Ok(files)
}

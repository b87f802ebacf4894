//! Small file helpers shared by the CLI: headerless numeric matrices,
//! atomic writes, event logs.

use std::fs;
use std::io::Read;
use std::path::Path;

use crate::engine::CrimeEvent;
use crate::error::{Error, Result};

/// Writes bytes to `path` via a temporary sibling file and an atomic rename,
/// so readers never observe a half-written file.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = std::path::PathBuf::from(tmp);
    fs::write(&tmp, bytes).map_err(|e| Error::io(&tmp, e))?;
    fs::rename(&tmp, path).map_err(|e| Error::io(path, e))?;
    Ok(())
}

pub fn read_to_string(path: &Path) -> Result<String> {
    fs::read_to_string(path).map_err(|e| Error::io(path, e))
}

pub fn open(path: &Path) -> Result<fs::File> {
    fs::File::open(path).map_err(|e| Error::io(path, e))
}

/// Formats a headerless comma-separated matrix, row-major. Values print in
/// Rust's shortest round-trip form, so whole numbers have no decimal point.
pub fn format_matrix_csv(data: &[f64], n_rows: usize, n_cols: usize) -> String {
    assert_eq!(data.len(), n_rows * n_cols);
    let mut out = String::new();
    for r in 0..n_rows {
        for c in 0..n_cols {
            if c > 0 {
                out.push(',');
            }
            out.push_str(&data[r * n_cols + c].to_string());
        }
        out.push('\n');
    }
    out
}

/// Parses a headerless comma-separated matrix. Every row must have the same
/// number of fields and every value must be a finite number.
pub fn parse_matrix_csv(input: impl Read, src: &str) -> Result<(Vec<f64>, usize, usize)> {
    let mut text = String::new();
    let mut input = input;
    input
        .read_to_string(&mut text)
        .map_err(|e| Error::schema(src, 0, format!("not valid UTF-8: {e}")))?;

    let mut data = Vec::new();
    let mut n_cols = None;
    let mut n_rows = 0;
    for (i, line) in text.lines().enumerate() {
        let line_no = i as u64 + 1;
        if line.trim().is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        match n_cols {
            None => n_cols = Some(fields.len()),
            Some(w) if w != fields.len() => {
                return Err(Error::schema(
                    src,
                    line_no,
                    format!("expected {w} fields, got {}", fields.len()),
                ));
            }
            _ => {}
        }
        for f in fields {
            let v: f64 = f
                .trim()
                .parse()
                .map_err(|_| Error::schema(src, line_no, format!("cannot parse number from {f:?}")))?;
            if !v.is_finite() {
                return Err(Error::schema(src, line_no, format!("non-finite value {f:?}")));
            }
            data.push(v);
        }
        n_rows += 1;
    }
    if n_rows == 0 {
        return Err(Error::schema(src, 0, "empty matrix".to_string()));
    }
    Ok((data, n_rows, n_cols.unwrap()))
}

/// Formats the event log as `day,slot,row,col,district`, one event per line
/// in simulation order. Events outside every district leave the field empty.
pub fn format_events_csv(events: &[CrimeEvent]) -> String {
    let mut out = String::from("day,slot,row,col,district\n");
    for e in events {
        let d = e.district.map(|d| d.to_string()).unwrap_or_default();
        out.push_str(&format!("{},{},{},{},{}\n", e.day, e.slot, e.row, e.col, d));
    }
    out
}

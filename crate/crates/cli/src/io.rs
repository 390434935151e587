//! CSV ingestion and emission, content digests.

use std::fs;
use std::path::Path;

use ndarray::Array2;
use sha2::{Digest, Sha256};

use crate::CliError;

/// First 64 bits of the SHA-256 of `bytes`, as 16 hex digits.
pub fn digest64(bytes: &[u8]) -> String {
    let hash = Sha256::digest(bytes);
    hash[..8].iter().map(|b| format!("{b:02x}")).collect()
}

pub fn file_digest(path: &Path) -> Result<String, CliError> {
    let bytes = fs::read(path).map_err(|e| CliError::usage(format!("cannot read {}: {e}", path.display())))?;
    Ok(digest64(&bytes))
}

fn parse_cell(s: &str) -> Option<f64> {
    // f64::from_str is locale independent and only accepts '.' as decimal separator.
    s.parse::<f64>().ok().filter(|v| v.is_finite())
}

/// Reads a numeric CSV; a first row with any non-numeric cell is a header.
/// Diagnostics cite 1-based file line and column numbers.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>, CliError> {
    let name = path.display();
    let bytes = fs::read(path).map_err(|e| CliError::usage(format!("cannot read {name}: {e}")))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(bytes.as_slice());
    let mut rows: Vec<Vec<f64>> = Vec::new();
    let mut width = None;
    for (k, record) in reader.records().enumerate() {
        let record = record.map_err(|e| CliError::usage(format!("{name}: malformed CSV: {e}")))?;
        let line = record.position().map_or(k as u64 + 1, |p| p.line());
        let parsed: Vec<Option<f64>> = record.iter().map(parse_cell).collect();
        if k == 0 && parsed.iter().any(Option::is_none) {
            continue;
        }
        let expected = *width.get_or_insert(parsed.len());
        if parsed.len() != expected {
            return Err(CliError::usage(format!("{name}: row {line} has {} columns, expected {expected}", parsed.len())));
        }
        if let Some(col) = parsed.iter().position(Option::is_none) {
            return Err(CliError::usage(format!(
                "{name}: row {line}, column {}: '{}' is not a finite number",
                col + 1,
                &record[col]
            )));
        }
        rows.push(parsed.into_iter().flatten().collect());
    }
    let p = width.unwrap_or(0);
    if rows.is_empty() || p == 0 {
        return Err(CliError::usage(format!("{name}: no numeric rows")));
    }
    Array2::from_shape_vec((rows.len(), p), rows.into_iter().flatten().collect())
        .map_err(|e| CliError::usage(format!("{name}: {e}")))
}

/// Writes rows as CSV with shortest round-trip float formatting.
pub fn write_rows<'a>(
    path: &Path,
    header: Option<&[&str]>,
    rows: impl IntoIterator<Item = &'a [f64]>,
) -> Result<(), CliError> {
    let io_err = |e: csv::Error| CliError::usage(format!("cannot write {}: {e}", path.display()));
    let mut w = csv::Writer::from_path(path).map_err(io_err)?;
    if let Some(h) = header {
        w.write_record(h).map_err(io_err)?;
    }
    for row in rows {
        w.write_record(row.iter().map(|v| v.to_string())).map_err(io_err)?;
    }
    w.flush().map_err(|e| CliError::usage(format!("cannot write {}: {e}", path.display())))
}

pub fn write_matrix(path: &Path, m: &Array2<f64>) -> Result<(), CliError> {
    let rows: Vec<Vec<f64>> = m.rows().into_iter().map(|r| r.to_vec()).collect();
    write_rows(path, None, rows.iter().map(Vec::as_slice))
}

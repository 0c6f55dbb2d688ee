//! CSV and JSON emission helpers.
//!
//! CSV files carry a header row and full-precision decimals (the shortest
//! representation that round-trips, which is what Rust's float formatter
//! produces). JSON goes through the serializer used everywhere else in the
//! crate, so reruns with the same inputs are byte-identical.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use crate::error::{Error, Result};
use crate::scheme::IndexedValue;

fn io_err(e: std::io::Error) -> Error {
    Error::Solver(format!("i/o failure: {e}"))
}

/// Writes rows of floats under a header. Every value is formatted with the
/// shortest round-tripping representation.
pub fn write_csv(path: &Path, header: &[&str], rows: &[Vec<f64>]) -> Result<()> {
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    writeln!(out, "{}", header.join(",")).map_err(io_err)?;
    for row in rows {
        let cells: Vec<String> = row.iter().map(|v| format!("{v}")).collect();
        writeln!(out, "{}", cells.join(",")).map_err(io_err)?;
    }
    out.flush().map_err(io_err)
}

/// Writes an `(index, value)` series.
pub fn write_series_csv(path: &Path, series: &[IndexedValue]) -> Result<()> {
    let rows: Vec<Vec<f64>> = series.iter().map(|iv| vec![iv.index, iv.value]).collect();
    write_csv(path, &["index", "value"], &rows)
}

/// Pretty-printed JSON with a trailing newline.
pub fn write_json(path: &Path, value: &impl serde::Serialize) -> Result<()> {
    let file = File::create(path).map_err(io_err)?;
    let mut out = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut out, value)
        .map_err(|e| Error::Solver(format!("serialization failure: {e}")))?;
    writeln!(out).map_err(io_err)?;
    out.flush().map_err(io_err)
}

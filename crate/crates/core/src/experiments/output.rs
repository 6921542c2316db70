//! CSV and manifest writers.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::Serialize;

use super::{SweepConfig, SweepRow};
use crate::error::Result;

/// Writes a header row and one record per item. Floats use the shortest
/// representation that round-trips, so identical inputs give identical bytes.
pub fn write_csv<T: Serialize>(path: &Path, items: &[T]) -> Result<()> {
    let mut writer = csv::Writer::from_path(path)?;
    for item in items {
        writer.serialize(item)?;
    }
    writer.flush()?;
    Ok(())
}

pub fn read_rows(path: &Path) -> Result<Vec<SweepRow>> {
    let mut reader = csv::Reader::from_path(path)?;
    let rows = reader.deserialize().collect::<std::result::Result<_, _>>()?;
    Ok(rows)
}

/// `key = value` text: library version, wall time, run summary and the
/// full config echo.
pub fn write_manifest(
    path: &Path,
    config: &SweepConfig,
    summary: &[(String, String)],
    wall_time_s: f64,
) -> Result<()> {
    let mut out = BufWriter::new(File::create(path)?);
    writeln!(out, "# tlasso run manifest")?;
    writeln!(out, "version = {}", crate::VERSION)?;
    writeln!(out, "wall_time_s = {wall_time_s:.3}")?;
    for (key, value) in summary {
        writeln!(out, "{key} = {value}")?;
    }
    writeln!(out, "# config")?;
    write!(out, "{}", config.to_text())?;
    out.flush()?;
    Ok(())
}

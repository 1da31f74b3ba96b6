//! Curve CSV ingestion and result serialization.
//!
//! Curve files are UTF-8 CSV: the header row holds the grid points (strictly
//! increasing reals) and each following row is one curve with the same column
//! count. No missing values. Paired mode reads separate X and Y files with
//! aligned rows and forms the differences Y - X.

use std::fmt::Write as _;
use std::path::Path;
use std::sync::Arc;

use crate::error::Error;
use crate::fspace::{Curve, Grid, PairedDiffSample};
use crate::harness::HarnessError;

type Result<T> = std::result::Result<T, HarnessError>;

fn format_err(line: usize, msg: impl Into<String>) -> HarnessError {
    HarnessError::Format {
        line: Some(line),
        msg: msg.into(),
    }
}

/// Parse one curve file: header = grid, rows = curves.
pub fn parse_curves_csv(path: &Path) -> Result<PairedDiffSample> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", path.display())))?;
    let (grid, rows) = parse_curves_text(&text)?;
    PairedDiffSample::from_rows(grid, rows).map_err(HarnessError::Stat)
}

/// Parse paired X/Y files and return the differences Y - X.
pub fn parse_paired_csv(x_path: &Path, y_path: &Path) -> Result<PairedDiffSample> {
    let x_text = std::fs::read_to_string(x_path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", x_path.display())))?;
    let y_text = std::fs::read_to_string(y_path)
        .map_err(|e| HarnessError::Io(format!("{}: {e}", y_path.display())))?;
    let (x_grid, x_rows) = parse_curves_text(&x_text)?;
    let (y_grid, y_rows) = parse_curves_text(&y_text)?;
    if x_grid.points() != y_grid.points() {
        return Err(HarnessError::Format {
            line: Some(1),
            msg: "X and Y files have different grids".into(),
        });
    }
    if x_rows.len() != y_rows.len() {
        return Err(HarnessError::Format {
            line: None,
            msg: format!(
                "row-count mismatch: X has {}, Y has {}",
                x_rows.len(),
                y_rows.len()
            ),
        });
    }
    let diffs = x_rows
        .into_iter()
        .zip(y_rows)
        .map(|(x, y)| y.iter().zip(&x).map(|(yi, xi)| yi - xi).collect())
        .collect();
    PairedDiffSample::from_rows(x_grid, diffs).map_err(HarnessError::Stat)
}

pub(crate) fn parse_curves_text(text: &str) -> Result<(Arc<Grid>, Vec<Vec<f64>>)> {
    let mut lines = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty());
    let (_, header) = lines.next().ok_or(HarnessError::Format {
        line: Some(1),
        msg: "empty file".into(),
    })?;
    let points = parse_numeric_row(header, 1)?;
    let grid = if points.len() == 1 {
        Grid::from_points_weights(points, vec![1.0])
    } else {
        Grid::trapezoid_from_points(points)
    }
    .map_err(|e| match e {
        Error::Invalid(msg) => format_err(1, format!("bad grid header: {msg}")),
        other => HarnessError::Stat(other),
    })?;

    let mut rows = Vec::new();
    for (idx, line) in lines {
        let row = parse_numeric_row(line, idx + 1)?;
        if row.len() != grid.len() {
            return Err(format_err(
                idx + 1,
                format!(
                    "ragged row: expected {} values, found {}",
                    grid.len(),
                    row.len()
                ),
            ));
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(HarnessError::Format {
            line: None,
            msg: "no curve rows".into(),
        });
    }
    Ok((grid, rows))
}

fn parse_numeric_row(line: &str, lineno: usize) -> Result<Vec<f64>> {
    line.split(',')
        .map(|cell| {
            let cell = cell.trim();
            cell.parse::<f64>()
                .map_err(|_| format_err(lineno, format!("non-numeric cell {cell:?}")))
        })
        .collect()
}

/// Write a sample as a curve CSV (header = grid points, one row per curve).
pub fn sample_to_csv(sample: &PairedDiffSample) -> String {
    let mut out = String::new();
    write_row(&mut out, sample.grid().points());
    for curve in sample.diffs() {
        write_row(&mut out, curve.values());
    }
    out
}

fn write_row(out: &mut String, values: &[f64]) {
    for (i, v) in values.iter().enumerate() {
        if i > 0 {
            out.push(',');
        }
        // Shortest round-trip representation: re-parsing recovers the bits.
        write!(out, "{v}").expect("string write");
    }
    out.push('\n');
}

/// Read a curve CSV from text (used by tests and by simulate round-trips).
pub fn sample_from_csv_text(text: &str) -> Result<PairedDiffSample> {
    let (grid, rows) = parse_curves_text(text)?;
    PairedDiffSample::from_rows(grid, rows).map_err(HarnessError::Stat)
}

impl PairedDiffSample {
    /// Curves reconstructed from parsed rows (row i = curve i values).
    pub fn row(&self, i: usize) -> &Curve {
        &self.diffs()[i]
    }
}

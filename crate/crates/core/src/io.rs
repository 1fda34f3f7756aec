//! CSV matrix I/O shared by the library and the CLI.
//!
//! Matrices are written one point per row with '.' decimals, no header,
//! and 17 significant digits so artifacts round-trip exactly.

use std::io::{BufRead, BufWriter, Write};
use std::path::Path;

use ndarray::{Array2, ArrayView2};

use crate::error::{Error, Result};
use crate::geometry::Landmarks;

/// Full-precision decimal formatting for a double.
pub fn format_f64(v: f64) -> String {
    format!("{v:.16e}")
}

/// Write a matrix as CSV, one *column* of the d×n matrix per CSV row
/// (points are columns internally, rows on disk).
pub fn write_matrix_csv(path: &Path, matrix: ArrayView2<f64>) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for col in matrix.columns() {
        let row: Vec<String> = col.iter().map(|&v| format_f64(v)).collect();
        writeln!(out, "{}", row.join(","))?;
    }
    Ok(())
}

/// Read a CSV written by [`write_matrix_csv`] back into a d×n matrix.
pub fn read_matrix_csv(path: &Path) -> Result<Array2<f64>> {
    let file = std::fs::File::open(path)?;
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let row: std::result::Result<Vec<f64>, _> =
            line.split(',').map(|f| f.trim().parse::<f64>()).collect();
        let row = row.map_err(|e| Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1)))?;
        if let Some(first) = rows.first() {
            if row.len() != first.len() {
                return Err(Error::Parse(format!(
                    "{}:{}: expected {} fields, got {}",
                    path.display(),
                    lineno + 1,
                    first.len(),
                    row.len()
                )));
            }
        }
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(Error::EmptyInput);
    }
    let d = rows[0].len();
    let n = rows.len();
    let mut matrix = Array2::zeros((d, n));
    for (i, row) in rows.iter().enumerate() {
        for (j, &v) in row.iter().enumerate() {
            matrix[[j, i]] = v;
        }
    }
    Ok(matrix)
}

pub fn write_landmarks_csv(path: &Path, landmarks: &Landmarks) -> Result<()> {
    write_matrix_csv(path, landmarks.points())
}

pub fn read_landmarks_csv(path: &Path) -> Result<Landmarks> {
    Landmarks::new(read_matrix_csv(path)?)
}

/// Write integer labels, one per line.
pub fn write_labels_csv(path: &Path, labels: &[usize]) -> Result<()> {
    let mut out = BufWriter::new(std::fs::File::create(path)?);
    for l in labels {
        writeln!(out, "{l}")?;
    }
    Ok(())
}

pub fn read_labels_csv(path: &Path) -> Result<Vec<usize>> {
    let file = std::fs::File::open(path)?;
    let mut labels = Vec::new();
    for (lineno, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        labels.push(line.trim().parse::<usize>().map_err(|e| {
            Error::Parse(format!("{}:{}: {e}", path.display(), lineno + 1))
        })?);
    }
    Ok(labels)
}

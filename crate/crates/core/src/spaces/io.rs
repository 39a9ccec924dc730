//! File formats for metric objects.
//!
//! * quantile-grid CSV: one distribution per row, `M` columns, optional header
//! * raw-sample CSV: one distribution per row of raw observations, rows may
//!   differ in length; converted with [`empirical_quantile_grid`]
//! * vector CSV: one point per row, optional header
//! * matrix files: `r` whitespace-separated rows of `r` numbers, one matrix
//!   per file; a directory is read as the sorted list of its files

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use super::euclidean::EuclideanPoint;
use super::matrix::{laplacian_from_adjacency, MatrixKind, SquareMatrixObject};
use super::quantile::{empirical_quantile_grid, QuantileDistribution};
use crate::error::{Error, Result};

/// One parsed CSV record together with its 1-based line number.
#[derive(Debug, Clone)]
pub struct NumericRow {
    pub line: usize,
    pub values: Vec<f64>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> Error + '_ {
    move |source| Error::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Reads numeric CSV rows of possibly varying length. A first row that does
/// not parse as numbers is taken as a header and skipped.
pub fn read_numeric_csv(path: &Path) -> Result<Vec<NumericRow>> {
    let file = fs::File::open(path).map_err(io_err(path))?;
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(true)
        .trim(csv::Trim::All)
        .comment(Some(b'#'))
        .from_reader(file);
    let mut rows = Vec::new();
    for (idx, record) in reader.records().enumerate() {
        let record = record.map_err(|e| Error::data(path, None, e.to_string()))?;
        let line = record.position().map_or(idx + 1, |p| p.line() as usize);
        let parsed: std::result::Result<Vec<f64>, _> =
            record.iter().filter(|f| !f.is_empty()).map(str::parse::<f64>).collect();
        match parsed {
            Ok(values) if values.is_empty() => {}
            Ok(values) => rows.push(NumericRow { line, values }),
            Err(_) if idx == 0 => {}
            Err(e) => {
                return Err(Error::data(path, Some(line), format!("not a number: {e}")));
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::data(path, None, "file contains no data rows"));
    }
    Ok(rows)
}

pub fn read_quantile_grid_csv(path: &Path) -> Result<Vec<QuantileDistribution>> {
    let rows = read_numeric_csv(path)?;
    let width = rows[0].values.len();
    rows.into_iter()
        .map(|r| {
            if r.values.len() != width {
                return Err(Error::data(
                    path,
                    Some(r.line),
                    format!("expected {width} grid values, found {}", r.values.len()),
                ));
            }
            QuantileDistribution::new(r.values).map_err(|e| Error::data(path, Some(r.line), e.to_string()))
        })
        .collect()
}

pub fn read_raw_sample_csv(path: &Path, grid_size: usize) -> Result<Vec<QuantileDistribution>> {
    read_numeric_csv(path)?
        .into_iter()
        .map(|r| {
            empirical_quantile_grid(&r.values, grid_size).map_err(|e| Error::data(path, Some(r.line), e.to_string()))
        })
        .collect()
}

pub fn read_vector_csv(path: &Path) -> Result<Vec<EuclideanPoint>> {
    let rows = read_numeric_csv(path)?;
    let width = rows[0].values.len();
    rows.into_iter()
        .map(|r| {
            if r.values.len() != width {
                return Err(Error::data(
                    path,
                    Some(r.line),
                    format!("expected {width} coordinates, found {}", r.values.len()),
                ));
            }
            EuclideanPoint::new(r.values).map_err(|e| Error::data(path, Some(r.line), e.to_string()))
        })
        .collect()
}

/// Reads a whitespace-separated square matrix, returning its dimension and
/// row-major entries.
pub fn read_matrix_entries(path: &Path) -> Result<(usize, Vec<f64>)> {
    let text = fs::read_to_string(path).map_err(io_err(path))?;
    let mut rows: Vec<(usize, Vec<f64>)> = Vec::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.split('#').next().unwrap_or_default().trim();
        if line.is_empty() {
            continue;
        }
        let row = line
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .map(str::parse::<f64>)
            .collect::<std::result::Result<Vec<_>, _>>()
            .map_err(|e| Error::data(path, Some(i + 1), format!("not a number: {e}")))?;
        rows.push((i + 1, row));
    }
    let dim = rows.len();
    if dim == 0 {
        return Err(Error::data(path, None, "file contains no matrix rows"));
    }
    let mut entries = Vec::with_capacity(dim * dim);
    for (line, row) in rows {
        if row.len() != dim {
            return Err(Error::data(
                path,
                Some(line),
                format!("matrix has {dim} rows but this row has {} entries", row.len()),
            ));
        }
        entries.extend(row);
    }
    Ok((dim, entries))
}

pub fn read_matrix_file(path: &Path, kind: MatrixKind) -> Result<SquareMatrixObject> {
    let (dim, entries) = read_matrix_entries(path)?;
    SquareMatrixObject::new(dim, entries, kind).map_err(|e| Error::data(path, None, e.to_string()))
}

/// Matrix files at `path`: the file itself, or every regular file in the
/// directory, sorted by name.
pub fn matrix_files(path: &Path) -> Result<Vec<PathBuf>> {
    if path.is_dir() {
        let mut files = fs::read_dir(path)
            .map_err(io_err(path))?
            .map(|e| e.map(|e| e.path()).map_err(io_err(path)))
            .collect::<Result<Vec<_>>>()?;
        files.retain(|p| p.is_file());
        files.sort();
        if files.is_empty() {
            return Err(Error::data(path, None, "directory contains no matrix files"));
        }
        Ok(files)
    } else {
        Ok(vec![path.to_path_buf()])
    }
}

pub fn read_matrices(path: &Path, kind: MatrixKind) -> Result<Vec<SquareMatrixObject>> {
    matrix_files(path)?.iter().map(|p| read_matrix_file(p, kind)).collect()
}

/// Reads an adjacency matrix file and converts it to a graph Laplacian.
pub fn read_adjacency_as_laplacian(path: &Path) -> Result<SquareMatrixObject> {
    let (dim, entries) = read_matrix_entries(path)?;
    laplacian_from_adjacency(dim, &entries).map_err(|e| Error::data(path, None, e.to_string()))
}

pub fn write_quantile_grid_csv<W: Write>(out: W, grids: &[QuantileDistribution]) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    for g in grids {
        w.write_record(g.values().iter().map(|v| format_number(*v)))
            .map_err(|e| Error::input(format!("failed to write CSV: {e}")))?;
    }
    w.flush()
        .map_err(|e| Error::input(format!("failed to write CSV: {e}")))?;
    Ok(())
}

pub fn write_matrix<W: Write>(mut out: W, m: &SquareMatrixObject) -> std::io::Result<()> {
    for row in m.rows() {
        let line: Vec<String> = row.iter().map(|v| format_number(*v)).collect();
        writeln!(out, "{}", line.join(" "))?;
    }
    Ok(())
}

/// Shortest representation that parses back to the same `f64`.
fn format_number(v: f64) -> String {
    format!("{v}")
}

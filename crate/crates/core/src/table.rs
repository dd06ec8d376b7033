//! Minimal CSV reading and writing for numeric tables.
//!
//! Files are comma separated, LF terminated, with one header row. Reals are
//! written with 17 significant digits so they parse back bit-exactly.

use std::fs;
use std::io;
use std::path::{Path, PathBuf};

use ndarray::Array2;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum TableError {
    #[error("I/O error on {path}: {source}")]
    Io { path: PathBuf, source: io::Error },

    #[error("{path}:{line}: expected {expected} fields, found {found}")]
    Ragged {
        path: PathBuf,
        line: usize,
        expected: usize,
        found: usize,
    },

    #[error("{path}:{line}: cannot parse {field:?} as a number")]
    NotNumeric { path: PathBuf, line: usize, field: String },

    #[error("{path}: no data rows")]
    Empty { path: PathBuf },
}

/// Formats a real with 17 significant digits (exact `f64` round trip).
pub fn fmt_real(v: f64) -> String {
    format!("{v:.16e}")
}

#[derive(Debug, Clone)]
pub struct Records {
    pub header: Vec<String>,
    pub records: Vec<Vec<String>>,
}

/// Reads a headed CSV file, rejecting rows whose width differs from the header.
pub fn read_records(path: &Path) -> Result<Records, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_records(&text, path)
}

pub fn parse_records(text: &str, path: &Path) -> Result<Records, TableError> {
    let mut lines = text.lines().enumerate().filter(|(_, l)| !l.trim().is_empty());
    let Some((_, head)) = lines.next() else {
        return Err(TableError::Empty {
            path: path.to_path_buf(),
        });
    };
    let header: Vec<String> = head.split(',').map(|s| s.trim().to_string()).collect();
    let mut records = Vec::new();
    for (i, line) in lines {
        let fields: Vec<String> = line.split(',').map(|s| s.trim().to_string()).collect();
        if fields.len() != header.len() {
            return Err(TableError::Ragged {
                path: path.to_path_buf(),
                line: i + 1,
                expected: header.len(),
                found: fields.len(),
            });
        }
        records.push(fields);
    }
    Ok(Records { header, records })
}

/// Reads a numeric matrix. A first row that does not parse as numbers is
/// taken as the header; otherwise every row is data.
pub fn read_matrix(path: &Path) -> Result<Array2<f64>, TableError> {
    let text = fs::read_to_string(path).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    parse_matrix(&text, path)
}

pub fn parse_matrix(text: &str, path: &Path) -> Result<Array2<f64>, TableError> {
    let rows: Vec<(usize, Vec<&str>)> = text
        .lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| (i + 1, l.split(',').map(str::trim).collect()))
        .collect();
    let numeric = |fields: &[&str]| fields.iter().all(|f| f.parse::<f64>().is_ok());
    let skip = usize::from(rows.first().is_some_and(|(_, f)| !numeric(f)));
    let data = &rows[skip.min(rows.len())..];
    let Some((_, first)) = data.first() else {
        return Err(TableError::Empty {
            path: path.to_path_buf(),
        });
    };
    let width = if skip == 1 { rows[0].1.len() } else { first.len() };
    let mut values = Vec::with_capacity(data.len() * width);
    for (line, fields) in data {
        if fields.len() != width {
            return Err(TableError::Ragged {
                path: path.to_path_buf(),
                line: *line,
                expected: width,
                found: fields.len(),
            });
        }
        for f in fields {
            values.push(f.parse::<f64>().map_err(|_| TableError::NotNumeric {
                path: path.to_path_buf(),
                line: *line,
                field: f.to_string(),
            })?);
        }
    }
    Ok(Array2::from_shape_vec((data.len(), width), values).expect("row widths checked"))
}

/// Renders a numeric table with the given header.
pub fn render(header: &[&str], rows: impl IntoIterator<Item = Vec<f64>>) -> String {
    let mut out = header.join(",");
    out.push('\n');
    for row in rows {
        let cells: Vec<String> = row.into_iter().map(fmt_real).collect();
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    out
}

pub fn write(path: &Path, contents: &str) -> Result<(), TableError> {
    fs::write(path, contents).map_err(|source| TableError::Io {
        path: path.to_path_buf(),
        source,
    })
}

//! Matrix files: comma-separated text and `SSL1` binary.
//!
//! CSV holds one matrix row per line, decimal floats with `.` as separator,
//! no header. Binary files use the `SSL1` framing from [`smsl_core::codec`].

use std::fs;
use std::path::Path;

use smsl_core::{codec, Matrix, RelevancyMatrix, SimilarityMatrix};

use crate::error::{CliError, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MatrixFormat {
    Csv,
    Binary,
}

impl MatrixFormat {
    /// `.csv` is text, anything else is binary.
    pub fn from_path(path: &Path) -> Self {
        match path.extension().and_then(|e| e.to_str()) {
            Some(e) if e.eq_ignore_ascii_case("csv") => MatrixFormat::Csv,
            _ => MatrixFormat::Binary,
        }
    }
}

pub fn read_bytes(path: &Path) -> Result<Vec<u8>> {
    fs::read(path).map_err(|e| CliError::io(path, e))
}

pub fn write_bytes(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| CliError::io(parent, e))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(path, e))
}

fn parse_csv(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(false)
        .flexible(false)
        .from_reader(bytes);
    let mut rows: Vec<Vec<f64>> = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| CliError::Parse {
            path: path.into(),
            line: e.position().map_or(0, csv::Position::line),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, csv::Position::line);
        let row = record
            .iter()
            .map(|field| {
                field.trim().parse::<f64>().map_err(|e| CliError::Parse {
                    path: path.into(),
                    line,
                    message: format!("{field:?}: {e}"),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        rows.push(row);
    }
    if rows.is_empty() {
        return Err(CliError::Parse {
            path: path.into(),
            line: 1,
            message: "no matrix rows".into(),
        });
    }
    Ok(Matrix::from_rows(&rows)?)
}

fn parse_binary(path: &Path, bytes: &[u8]) -> Result<Matrix> {
    codec::decode(bytes).map_err(|e| match e {
        smsl_core::Error::Parse { offset, message } => CliError::Parse {
            path: path.into(),
            line: offset as u64,
            message: format!("byte offset {offset}: {message}"),
        },
        other => other.into(),
    })
}

pub fn read_matrix(path: &Path, format: MatrixFormat) -> Result<Matrix> {
    let bytes = read_bytes(path)?;
    match format {
        MatrixFormat::Csv => parse_csv(path, &bytes),
        MatrixFormat::Binary => parse_binary(path, &bytes),
    }
}

pub fn matrix_to_csv(m: &Matrix) -> String {
    let mut out = String::new();
    for row in m.row_iter() {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        out.push_str(&line.join(","));
        out.push('\n');
    }
    out
}

pub fn write_matrix(path: &Path, m: &Matrix, format: MatrixFormat) -> Result<()> {
    match format {
        MatrixFormat::Csv => write_bytes(path, matrix_to_csv(m).as_bytes()),
        MatrixFormat::Binary => write_bytes(path, &codec::encode(m)),
    }
}

pub fn load_relevancy(path: &Path, format: MatrixFormat) -> Result<RelevancyMatrix> {
    let m = read_matrix(path, format)?;
    RelevancyMatrix::new(m).map_err(|e| match e {
        smsl_core::Error::Range { row, col, value } => CliError::Range {
            path: path.into(),
            row,
            col,
            value,
        },
        other => other.into(),
    })
}

pub fn save_relevancy(path: &Path, m: &RelevancyMatrix, format: MatrixFormat) -> Result<()> {
    write_matrix(path, m.matrix(), format)
}

/// Loads a similarity matrix, choosing the format from the file extension.
pub fn load_similarity(path: &Path) -> Result<SimilarityMatrix> {
    Ok(SimilarityMatrix::new(read_matrix(
        path,
        MatrixFormat::from_path(path),
    )?)?)
}

pub fn save_similarity(path: &Path, s: &SimilarityMatrix) -> Result<()> {
    write_matrix(path, s.matrix(), MatrixFormat::from_path(path))
}

use std::path::Path;

use aeronet::nn::Sample;
use thiserror::Error;

#[derive(Debug, Error, PartialEq)]
pub enum DatasetError {
    #[error("cannot read {path}: {message}")]
    Io { path: String, message: String },
    #[error("header has {found} columns, expected {expected} ({inputs} inputs then {targets} targets)")]
    Header { found: usize, expected: usize, inputs: usize, targets: usize },
    #[error("line {line}: expected {expected} fields, found {found}")]
    Arity { line: u64, expected: usize, found: usize },
    #[error("line {line}, column {column}: {value:?} is not a number")]
    NotNumeric { line: u64, column: String, value: String },
    #[error("line {line}: malformed record: {message}")]
    Malformed { line: u64, message: String },
    #[error("dataset has no rows")]
    Empty,
}

/// Reads comma-separated samples. The header names the `inputs` feature
/// columns first, then the `targets` target columns; rows keep file order.
pub fn load_dataset(path: &Path, inputs: usize, targets: usize) -> Result<Vec<Sample>, DatasetError> {
    let io = |e: &dyn std::fmt::Display| DatasetError::Io { path: path.display().to_string(), message: e.to_string() };
    let mut reader = csv::ReaderBuilder::new()
        .flexible(true)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| io(&e))?;
    let expected = inputs + targets;
    let header = reader.headers().map_err(|e| io(&e))?.clone();
    if header.len() != expected {
        return Err(DatasetError::Header { found: header.len(), expected, inputs, targets });
    }
    let mut samples = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| DatasetError::Malformed {
            line: e.position().map_or(0, |p| p.line()),
            message: e.to_string(),
        })?;
        let line = record.position().map_or(0, |p| p.line());
        if record.len() != expected {
            return Err(DatasetError::Arity { line, expected, found: record.len() });
        }
        let mut values = Vec::with_capacity(expected);
        for (column, cell) in header.iter().zip(record.iter()) {
            let v: f64 = cell.parse().ok().filter(|v: &f64| v.is_finite()).ok_or_else(|| DatasetError::NotNumeric {
                line,
                column: column.to_string(),
                value: cell.to_string(),
            })?;
            values.push(v);
        }
        let target = values.split_off(inputs);
        samples.push(Sample::new(values, target));
    }
    if samples.is_empty() {
        return Err(DatasetError::Empty);
    }
    Ok(samples)
}

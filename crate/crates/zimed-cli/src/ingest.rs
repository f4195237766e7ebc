//! CSV ingestion. Comma-separated, UTF-8, header row required. Errors carry
//! the 1-based line number and the column name so they can be fixed in an
//! editor without guesswork.

use std::fs::File;
use std::path::Path;

use thiserror::Error;
use zimed_core::{Dataset, Record};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot open {path}: {source}")]
    Open {
        path: String,
        source: std::io::Error,
    },
    #[error("missing column '{0}' in the header")]
    MissingColumn(String),
    #[error("line {line}: column '{column}' has no value")]
    MissingValue { line: u64, column: String },
    #[error("line {line}: column '{column}' value '{value}' is not a number")]
    BadCell {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: column '{column}' is not finite")]
    NonFinite { line: u64, column: String },
    #[error("line {line}: mediator negative ({value})")]
    NegativeMediator { line: u64, value: f64 },
    #[error("no data rows after the header")]
    Empty,
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Data(#[from] zimed_core::Error),
}

/// Which columns play which role.
#[derive(Debug, Clone)]
pub struct ColumnMap {
    pub y: String,
    pub m: String,
    pub x: String,
    pub z: Vec<String>,
}

/// Read and validate a data set.
///
/// # Errors
///
/// See [`IngestError`]; every shape names the offending line or column.
pub fn ingest_csv(path: &Path, map: &ColumnMap) -> Result<Dataset, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Open {
        path: path.display().to_string(),
        source,
    })?;
    let mut reader = csv::Reader::from_reader(file);

    let headers = reader.headers()?.clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))
    };
    let y_ix = find(&map.y)?;
    let m_ix = find(&map.m)?;
    let x_ix = find(&map.x)?;
    let z_ix: Vec<usize> = map.z.iter().map(|name| find(name)).collect::<Result<_, _>>()?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row?;
        let line = row.position().map_or(0, |p| p.line());
        let cell = |ix: usize, column: &str| -> Result<f64, IngestError> {
            let raw = row.get(ix).unwrap_or("").trim();
            if raw.is_empty() {
                return Err(IngestError::MissingValue { line, column: column.to_string() });
            }
            let value: f64 = raw.parse().map_err(|_| IngestError::BadCell {
                line,
                column: column.to_string(),
                value: raw.to_string(),
            })?;
            if !value.is_finite() {
                return Err(IngestError::NonFinite { line, column: column.to_string() });
            }
            Ok(value)
        };

        let y = cell(y_ix, &map.y)?;
        let m_obs = cell(m_ix, &map.m)?;
        if m_obs < 0.0 {
            return Err(IngestError::NegativeMediator { line, value: m_obs });
        }
        let x = cell(x_ix, &map.x)?;
        let mut record = Record::new(y, m_obs, x);
        for (ix, name) in z_ix.iter().zip(&map.z) {
            record.z.push(cell(*ix, name)?);
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(IngestError::Empty);
    }
    Ok(Dataset::new(records)?)
}

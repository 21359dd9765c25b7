use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use super::{CovariatePathSpec, Dataset};
use crate::error::{CoxError, Result};

/// Column mapping for CSV ingestion.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub time: String,
    pub status: String,
    pub features: Vec<String>,
    pub path: CovariatePathSpec,
    pub delimiter: u8,
}

impl CsvSchema {
    pub fn new(time: impl Into<String>, status: impl Into<String>, features: Vec<String>) -> Self {
        Self {
            time: time.into(),
            status: status.into(),
            features,
            path: CovariatePathSpec::Constant,
            delimiter: b',',
        }
    }
}

#[derive(Debug, Clone)]
pub struct CsvLoad {
    pub dataset: Dataset,
    /// Rows skipped because a mapped column was missing or non-numeric.
    pub dropped_rows: usize,
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<CsvLoad> {
    read_csv(File::open(path)?, schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<CsvLoad> {
    if schema.features.is_empty() {
        return Err(CoxError::InvalidArgument("at least one feature column is required".into()));
    }
    let mut rdr = csv::ReaderBuilder::new()
        .delimiter(schema.delimiter)
        .has_headers(true)
        .flexible(true)
        .from_reader(reader);
    let headers = rdr.headers()?.clone();
    if headers.is_empty() {
        return Err(CoxError::EmptyDataset);
    }
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CoxError::MissingColumn(name.to_string()))
    };
    let time_col = find(&schema.time)?;
    let status_col = find(&schema.status)?;
    let feature_cols = schema.features.iter().map(|f| find(f)).collect::<Result<Vec<_>>>()?;

    let parse = |rec: &csv::StringRecord, col: usize| -> Option<f64> {
        rec.get(col)
            .and_then(|s| s.trim().parse::<f64>().ok())
            .filter(|v| v.is_finite())
    };

    let d = feature_cols.len();
    let mut time = Vec::new();
    let mut status = Vec::new();
    let mut features = Vec::new();
    let mut dropped = 0;
    let mut row_buf = vec![0.0; d];
    for (row, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let (Some(y), Some(s)) = (parse(&rec, time_col), parse(&rec, status_col)) else {
            dropped += 1;
            continue;
        };
        let mut ok = true;
        for (slot, &c) in row_buf.iter_mut().zip(&feature_cols) {
            match parse(&rec, c) {
                Some(v) => *slot = v,
                None => {
                    ok = false;
                    break;
                }
            }
        }
        if !ok {
            dropped += 1;
            continue;
        }
        if y < 0.0 {
            return Err(CoxError::NegativeTime { row, value: y });
        }
        let delta = if s == 0.0 {
            false
        } else if s == 1.0 {
            true
        } else {
            return Err(CoxError::InvalidStatus { row, value: s });
        };
        time.push(y);
        status.push(delta);
        features.extend_from_slice(&row_buf);
    }
    if time.is_empty() {
        return Err(CoxError::EmptyDataset);
    }
    let dataset = Dataset::new(time, status, features, d, schema.path.clone())?
        .with_feature_names(schema.features.clone())?;
    Ok(CsvLoad { dataset, dropped_rows: dropped })
}

/// Writes `time,status,<features>` rows in input order. Floats use the
/// shortest representation that parses back to the same value.
pub fn write_csv<W: Write>(dataset: &Dataset, writer: W, delimiter: u8) -> Result<()> {
    let mut w = csv::WriterBuilder::new().delimiter(delimiter).from_writer(writer);
    let mut header = vec!["time".to_string(), "status".to_string()];
    header.extend(dataset.feature_names().iter().cloned());
    w.write_record(&header)?;
    let mut row = Vec::with_capacity(header.len());
    for i in 0..dataset.n() {
        row.clear();
        row.push(dataset.time(i).to_string());
        row.push(if dataset.status(i) { "1" } else { "0" }.to_string());
        row.extend(dataset.features(i).iter().map(|v| v.to_string()));
        w.write_record(&row)?;
    }
    w.flush()?;
    Ok(())
}

//! Dataset and sample tables as CSV with a header row.
//!
//! A dataset file holds numeric feature columns, one binary label column
//! (default name `Class`) and optionally a `synthetic` provenance column of
//! `0`/`1` marking generated rows.

use std::fs::File;
use std::io::Write;
use std::path::Path;

use scoregen_core::{LabeledDataset, Matrix};

pub const DEFAULT_LABEL_COLUMN: &str = "Class";
pub const PROVENANCE_COLUMN: &str = "synthetic";

#[derive(Debug, thiserror::Error)]
pub enum CsvError {
    #[error("cannot open {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("{0}")]
    Csv(#[from] csv::Error),
    #[error("file has no header or no data rows")]
    Empty,
    #[error("column `{0}` not found in header")]
    MissingColumn(String),
    #[error("row {row}, column {column} (`{name}`): `{value}` is not a number")]
    NonNumeric {
        row: usize,
        column: usize,
        name: String,
        value: String,
    },
    #[error("row {row}, column {column} (`{name}`): label `{value}` is not 0 or 1")]
    NonBinaryLabel {
        row: usize,
        column: usize,
        name: String,
        value: String,
    },
    #[error("row {row}: expected {expected} fields, found {found}")]
    Ragged {
        row: usize,
        expected: usize,
        found: usize,
    },
    #[error(transparent)]
    Core(#[from] scoregen_core::Error),
}

/// Which columns of a dataset file to read.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvOptions {
    pub label_column: String,
    /// Feature columns by name; `None` takes every other column.
    pub columns: Option<Vec<String>>,
    /// Keep only the first `n` feature columns after selection.
    pub first_n: Option<usize>,
}

impl Default for CsvOptions {
    fn default() -> Self {
        Self {
            label_column: DEFAULT_LABEL_COLUMN.into(),
            columns: None,
            first_n: None,
        }
    }
}

fn reader(path: &Path) -> Result<csv::Reader<File>, CsvError> {
    let file = File::open(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(true)
        .trim(csv::Trim::All)
        .from_reader(file))
}

fn parse_number(raw: &str, row: usize, column: usize, name: &str) -> Result<f64, CsvError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| CsvError::NonNumeric {
            row,
            column,
            name: name.into(),
            value: raw.into(),
        })
}

fn parse_label(raw: &str, row: usize, column: usize, name: &str) -> Result<u8, CsvError> {
    match raw.parse::<f64>() {
        Ok(v) if v == 0.0 => Ok(0),
        Ok(v) if v == 1.0 => Ok(1),
        _ => Err(CsvError::NonBinaryLabel {
            row,
            column,
            name: name.into(),
            value: raw.into(),
        }),
    }
}

/// Reads a labelled dataset. Rows are numbered from 1 after the header and
/// columns from 0 in error messages.
pub fn load_csv(path: &Path, opts: &CsvOptions) -> Result<LabeledDataset, CsvError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    if header.is_empty() || header.iter().all(|h| h.is_empty()) {
        return Err(CsvError::Empty);
    }
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| CsvError::MissingColumn(name.into()))
    };
    let label_at = find(&opts.label_column)?;
    let provenance_at = header.iter().position(|h| h == PROVENANCE_COLUMN);
    let mut feature_at: Vec<usize> = match &opts.columns {
        Some(names) => names.iter().map(|n| find(n)).collect::<Result<_, _>>()?,
        None => (0..header.len())
            .filter(|&i| i != label_at && Some(i) != provenance_at)
            .collect(),
    };
    if let Some(n) = opts.first_n {
        feature_at.truncate(n);
    }
    let mut values = Vec::new();
    let mut labels = Vec::new();
    let mut synthetic = Vec::new();
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        let row = r + 1;
        if record.len() != header.len() {
            return Err(CsvError::Ragged {
                row,
                expected: header.len(),
                found: record.len(),
            });
        }
        for &c in &feature_at {
            values.push(parse_number(&record[c], row, c, &header[c])?);
        }
        labels.push(parse_label(&record[label_at], row, label_at, &header[label_at])?);
        if let Some(p) = provenance_at {
            synthetic.push(parse_label(&record[p], row, p, PROVENANCE_COLUMN)? == 1);
        }
    }
    if labels.is_empty() {
        return Err(CsvError::Empty);
    }
    let names = feature_at.iter().map(|&c| header[c].clone()).collect();
    let features = Matrix::from_vec(labels.len(), feature_at.len(), values)?;
    let mut data = LabeledDataset::new(features, labels)?.with_column_names(names)?;
    if provenance_at.is_some() {
        data = data.with_synthetic_flags(synthetic)?;
    }
    Ok(data)
}

fn create(path: &Path) -> Result<csv::Writer<File>, CsvError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir).map_err(|source| CsvError::Io {
            path: dir.display().to_string(),
            source,
        })?;
    }
    let file = File::create(path).map_err(|source| CsvError::Io {
        path: path.display().to_string(),
        source,
    })?;
    Ok(csv::Writer::from_writer(file))
}

/// Shortest text that parses back to the same `f64`.
pub fn fmt_f64(v: f64) -> String {
    format!("{v:?}")
}

pub fn feature_names(data: &LabeledDataset) -> Vec<String> {
    if data.column_names().len() == data.dim() {
        data.column_names().to_vec()
    } else {
        (0..data.dim()).map(|i| format!("x{i}")).collect()
    }
}

/// Writes features, the label column and, when any row is synthetic, the
/// provenance column.
pub fn write_dataset(path: &Path, data: &LabeledDataset, label_column: &str) -> Result<(), CsvError> {
    let mut w = create(path)?;
    let with_provenance = data.synthetic().iter().any(|s| *s);
    let mut header = feature_names(data);
    header.push(label_column.into());
    if with_provenance {
        header.push(PROVENANCE_COLUMN.into());
    }
    w.write_record(&header)?;
    for i in 0..data.len() {
        let mut rec: Vec<String> = data.row(i).iter().map(|v| fmt_f64(*v)).collect();
        rec.push(data.labels()[i].to_string());
        if with_provenance {
            rec.push(u8::from(data.synthetic()[i]).to_string());
        }
        w.write_record(&rec)?;
    }
    w.flush().map_err(|e| CsvError::Csv(e.into()))?;
    Ok(())
}

/// Writes a bare numeric table.
pub fn write_table(path: &Path, header: &[String], rows: &[Vec<f64>]) -> Result<(), CsvError> {
    let mut w = create(path)?;
    w.write_record(header)?;
    for r in rows {
        w.write_record(r.iter().map(|v| fmt_f64(*v)))?;
    }
    w.flush().map_err(|e| CsvError::Csv(e.into()))?;
    Ok(())
}

pub fn write_matrix(path: &Path, header: &[String], m: &Matrix) -> Result<(), CsvError> {
    let rows: Vec<Vec<f64>> = m.iter_rows().map(<[f64]>::to_vec).collect();
    write_table(path, header, &rows)
}

/// Reads every column of a numeric table, returning header and values.
pub fn read_table(path: &Path) -> Result<(Vec<String>, Matrix), CsvError> {
    let mut rdr = reader(path)?;
    let header: Vec<String> = rdr.headers()?.iter().map(str::to_owned).collect();
    let mut values = Vec::new();
    let mut n = 0;
    for (r, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != header.len() {
            return Err(CsvError::Ragged {
                row: r + 1,
                expected: header.len(),
                found: record.len(),
            });
        }
        for (c, raw) in record.iter().enumerate() {
            values.push(parse_number(raw, r + 1, c, &header[c])?);
        }
        n += 1;
    }
    if n == 0 || header.is_empty() {
        return Err(CsvError::Empty);
    }
    Ok((header.clone(), Matrix::from_vec(n, header.len(), values)?))
}

/// Writes `text` to `path`, creating parent directories.
pub fn write_text(path: &Path, text: &str) -> std::io::Result<()> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        std::fs::create_dir_all(dir)?;
    }
    File::create(path)?.write_all(text.as_bytes())
}

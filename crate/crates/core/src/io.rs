//! CSV matrices and JSON reports.
//!
//! CSV files are comma-separated with one sample per row and no header by
//! default. Floats are written in shortest round-trip form.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::Serialize;

use crate::error::{HnnError, Result};
use crate::linalg::Matrix;

fn file_error(path: &Path, e: csv::Error) -> HnnError {
    match e.into_kind() {
        csv::ErrorKind::Io(source) => HnnError::File { path: path.to_owned(), source },
        other => HnnError::CsvFormat(format!("{}: {other:?}", path.display())),
    }
}

pub fn read_csv(path: &Path, header: bool) -> Result<Matrix> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(header)
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| file_error(path, e))?;
    let mut values = Vec::new();
    let mut cols = None;
    let mut rows = 0;
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        if record.len() == 1 && record[0].is_empty() {
            continue;
        }
        match cols {
            None => cols = Some(record.len()),
            Some(c) if c != record.len() => {
                return Err(HnnError::CsvFormat(format!(
                    "{}: row {} has {} fields, expected {c}",
                    path.display(),
                    i + 1,
                    record.len()
                )))
            }
            _ => {}
        }
        for field in record.iter() {
            let v: f64 = field.parse().map_err(|_| {
                HnnError::CsvFormat(format!("{}: row {}: cannot parse {field:?} as a number", path.display(), i + 1))
            })?;
            values.push(v);
        }
        rows += 1;
    }
    let cols = cols.ok_or_else(|| HnnError::CsvFormat(format!("{}: no data rows", path.display())))?;
    Ok(Matrix::from_row_slice(rows, cols, &values))
}

pub fn write_csv(path: &Path, m: &Matrix, header: bool) -> Result<()> {
    let file = File::create(path).map_err(|e| HnnError::File { path: path.to_owned(), source: e })?;
    let mut writer = csv::Writer::from_writer(BufWriter::new(file));
    if header {
        writer.write_record((1..=m.ncols()).map(|j| format!("c{j}")))?;
    }
    for i in 0..m.nrows() {
        writer.write_record(m.row(i).iter().map(|v| v.to_string()))?;
    }
    writer.flush()?;
    Ok(())
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let file = File::create(path).map_err(|e| HnnError::File { path: path.to_owned(), source: e })?;
    let mut w = BufWriter::new(file);
    serde_json::to_writer_pretty(&mut w, value)?;
    w.write_all(b"\n")?;
    w.flush()?;
    Ok(())
}

pub fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let text = std::fs::read_to_string(path).map_err(|e| HnnError::File { path: path.to_owned(), source: e })?;
    Ok(serde_json::from_str(&text)?)
}

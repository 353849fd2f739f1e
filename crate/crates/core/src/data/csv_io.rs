//! CSV ingestion and export.
//!
//! Layout: header line first, mandatory `id` and `label` columns anywhere in the
//! header, every other column a decimal real taken as a feature in header order.
//! Row numbers in errors are 0-based data-row indices (the header is not counted).

use std::collections::HashSet;
use std::io::{Read, Write};
use std::path::Path;

use super::Dataset;
use crate::error::{Error, Result};

pub fn load_csv(path: impl AsRef<Path>) -> Result<Dataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    read_csv(file)
}

pub fn read_csv<R: Read>(reader: R) -> Result<Dataset> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .from_reader(reader);
    let header = rdr.headers().map_err(csv_err)?.clone();
    let id_col = header
        .iter()
        .position(|h| h == "id")
        .ok_or_else(|| Error::MissingColumn("id".into()))?;
    let label_col = header
        .iter()
        .position(|h| h == "label")
        .ok_or_else(|| Error::MissingColumn("label".into()))?;
    let feature_cols: Vec<usize> = (0..header.len())
        .filter(|&c| c != id_col && c != label_col)
        .collect();
    let feature_names: Vec<String> = feature_cols
        .iter()
        .map(|&c| header[c].to_string())
        .collect();

    let mut ids = Vec::new();
    let mut labels = Vec::new();
    let mut features = Vec::new();
    let mut seen = HashSet::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record.map_err(csv_err)?;
        let id = record[id_col].to_string();
        if !seen.insert(id.clone()) {
            return Err(Error::DuplicateId(id));
        }
        let label = match record[label_col].trim() {
            "0" => 0u8,
            "1" => 1u8,
            _ => return Err(Error::NonBinaryLabel { row }),
        };
        for (k, &c) in feature_cols.iter().enumerate() {
            let cell = record[c].trim();
            let value: f64 = cell.parse().map_err(|_| Error::NonNumericCell {
                row,
                col: feature_names[k].clone(),
            })?;
            if !value.is_finite() {
                return Err(Error::NonFiniteFeature { row, col: k });
            }
            features.push(value);
        }
        ids.push(id);
        labels.push(label);
    }
    Dataset::from_flat(ids, features, labels, feature_names)
}

pub fn write_csv(dataset: &Dataset, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let file = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    write_csv_to(dataset, std::io::BufWriter::new(file)).map_err(|e| match e {
        Error::Csv(msg) => Error::io(path, std::io::Error::other(msg)),
        other => other,
    })
}

/// Writes `id,label,<features...>`; reals use the shortest representation that parses back exactly.
pub fn write_csv_to<W: Write>(dataset: &Dataset, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec!["id".to_string(), "label".to_string()];
    header.extend(dataset.feature_names().iter().cloned());
    wtr.write_record(&header).map_err(csv_err)?;
    let mut record = Vec::with_capacity(header.len());
    for i in 0..dataset.n_rows() {
        record.clear();
        record.push(dataset.ids()[i].clone());
        record.push(dataset.labels()[i].to_string());
        record.extend(dataset.row(i).iter().map(|v| v.to_string()));
        wtr.write_record(&record).map_err(csv_err)?;
    }
    wtr.flush().map_err(|e| Error::Csv(e.to_string()))?;
    Ok(())
}

fn csv_err(e: csv::Error) -> Error {
    Error::Csv(e.to_string())
}

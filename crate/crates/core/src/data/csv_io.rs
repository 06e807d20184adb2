use std::io::{Read, Write};

use super::{DataError, Dataset, TARGET_COLUMN};

/// Read a comma-separated file with a header row.
///
/// Columns are reordered to `schema` order; columns not named in the schema
/// are ignored. Lines starting with `#` are treated as comments. Row indices
/// in errors count data rows from 0.
pub fn load_csv<R: Read>(source: R, schema: &[&str]) -> Result<Dataset, DataError> {
    let mut reader = csv::ReaderBuilder::new()
        .has_headers(true)
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(source);
    let header = reader.headers()?.clone();
    let find = |name: &str| {
        header
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| DataError::MissingColumn(name.to_string()))
    };
    let columns = schema.iter().map(|name| find(name)).collect::<Result<Vec<_>, _>>()?;
    let target_col = find(TARGET_COLUMN)?;

    let mut features = Vec::new();
    let mut targets = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for (&col, &name) in columns.iter().zip(schema) {
            let value = record
                .get(col)
                .and_then(|cell| cell.parse::<f64>().ok())
                .filter(|v| v.is_finite())
                .ok_or_else(|| DataError::NonNumericCell {
                    row,
                    column: name.to_string(),
                })?;
            features.push(value);
        }
        let raw = record.get(target_col).unwrap_or("");
        let label = match raw.parse::<f64>() {
            Ok(0.0) => 0,
            Ok(1.0) => 1,
            _ => {
                return Err(DataError::InvalidTarget {
                    row,
                    value: raw.to_string(),
                })
            }
        };
        targets.push(label);
    }
    if targets.is_empty() {
        return Err(DataError::EmptyDataset);
    }
    Dataset::new(
        schema.iter().map(|s| s.to_string()).collect(),
        features,
        targets,
    )
}

/// Like [`load_csv`], keeping whichever columns of `schema` the file has, in
/// schema order. At least one of them must be present.
pub fn load_csv_available<R: Read>(mut source: R, schema: &[&str]) -> Result<Dataset, DataError> {
    let mut text = Vec::new();
    source.read_to_end(&mut text)?;
    let header = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .trim(csv::Trim::All)
        .from_reader(text.as_slice())
        .headers()?
        .clone();
    let present: Vec<&str> = schema
        .iter()
        .copied()
        .filter(|name| header.iter().any(|h| h == *name))
        .collect();
    if present.is_empty() {
        return Err(DataError::MissingColumn(schema.first().copied().unwrap_or_default().to_string()));
    }
    load_csv(text.as_slice(), &present)
}

/// Write the dataset with a header row. Values use the shortest decimal
/// form that parses back to the same `f64`.
pub fn write_csv<W: Write>(dataset: &Dataset, sink: W) -> Result<(), DataError> {
    let mut writer = csv::Writer::from_writer(sink);
    let mut header: Vec<&str> = dataset.feature_names().iter().map(String::as_str).collect();
    header.push(TARGET_COLUMN);
    writer.write_record(&header)?;
    let mut record = Vec::with_capacity(header.len());
    for (row, &target) in dataset.rows().zip(dataset.targets()) {
        record.clear();
        record.extend(row.iter().map(|v| v.to_string()));
        record.push(target.to_string());
        writer.write_record(&record)?;
    }
    writer.flush()?;
    Ok(())
}

use std::path::Path;

use pimfit::Dataset;

use crate::error::{CliError, CliResult};

/// Cells read as missing; a row with any of these in a selected column is
/// dropped.
pub const MISSING_TOKENS: [&str; 4] = ["", "NA", "NaN", "."];

#[derive(Debug, Clone, PartialEq)]
pub struct LoadedCsv {
    pub data: Dataset,
    pub rows_read: usize,
    pub dropped: usize,
}

/// Reads `response` and `columns` from a headed CSV file, keeping complete
/// cases only.
pub fn load_csv(path: &Path, response: &str, columns: &[String]) -> CliResult<LoadedCsv> {
    let file = std::fs::File::open(path).map_err(|e| CliError::io(format!("cannot open {}", path.display()), e))?;
    read_csv(file, response, columns)
}

pub fn read_csv<R: std::io::Read>(reader: R, response: &str, columns: &[String]) -> CliResult<LoadedCsv> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| CliError::Data(format!("cannot read header row: {e}")))?
        .clone();
    let locate = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .ok_or_else(|| CliError::Data(format!("column '{name}' not found in header")))
    };
    let mut wanted = vec![response.to_string()];
    wanted.extend(columns.iter().filter(|c| c.as_str() != response).cloned());
    let idx = wanted.iter().map(|c| locate(c)).collect::<CliResult<Vec<_>>>()?;

    let mut values: Vec<Vec<f64>> = vec![Vec::new(); wanted.len()];
    let (mut rows_read, mut dropped) = (0, 0);
    let mut row = vec![0.0; wanted.len()];
    for (r, record) in rdr.records().enumerate() {
        // header is line 1
        let line = r + 2;
        let record = record.map_err(|e| CliError::Data(format!("line {line}: {e}")))?;
        rows_read += 1;
        let mut complete = true;
        for (slot, (&k, name)) in idx.iter().zip(&wanted).enumerate() {
            let cell = record.get(k).unwrap_or("").trim();
            if MISSING_TOKENS.contains(&cell) {
                complete = false;
                continue;
            }
            match cell.parse::<f64>() {
                Ok(v) if v.is_finite() => row[slot] = v,
                _ => {
                    return Err(CliError::Data(format!(
                        "line {line}, column '{name}': cannot parse '{cell}' as a number"
                    )))
                }
            }
        }
        if complete {
            for (col, &v) in values.iter_mut().zip(&row) {
                col.push(v);
            }
        } else {
            dropped += 1;
        }
    }
    if values[0].is_empty() {
        return Err(CliError::Data(format!("no complete rows among {rows_read}")));
    }
    let y = values.remove(0);
    let data = Dataset::new(y, values, wanted[1..].to_vec())?;
    Ok(LoadedCsv {
        data,
        rows_read,
        dropped,
    })
}

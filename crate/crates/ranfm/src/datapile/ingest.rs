//! CSV ingestion.
//!
//! Contract: UTF-8, comma-separated, required header row; column 1 named
//! `timestamp` holding integer milliseconds or decimal seconds; remaining
//! columns numeric; missing = empty cell or a literal NaN. A column named
//! `label` is captured as labels rather than as a channel.

use std::io::Read;
use std::path::Path;

use crate::datapile::types::{RawColumn, RawTable};
use crate::error::{Error, Result};

fn parse_timestamp_ms(cell: &str) -> Result<i64> {
    let cell = cell.trim();
    if let Ok(ms) = cell.parse::<i64>() {
        return Ok(ms);
    }
    match cell.parse::<f64>() {
        Ok(sec) if sec.is_finite() => Ok((sec * 1000.0).round() as i64),
        _ => Err(Error::data(format!("unparseable timestamp `{cell}`"))),
    }
}

fn parse_cell(cell: &str) -> (f64, bool) {
    let cell = cell.trim();
    if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
        return (f64::NAN, true);
    }
    match cell.parse::<f64>() {
        Ok(v) if v.is_finite() => (v, false),
        _ => (f64::NAN, true),
    }
}

/// Ingest a CSV file. Non-monotone timestamps are accepted here and
/// resolved by temporal alignment.
pub fn ingest_csv(path: &Path) -> Result<RawTable> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    ingest_reader(file, &path.display().to_string())
}

pub fn ingest_reader<R: Read>(reader: R, provenance: &str) -> Result<RawTable> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("{provenance}: missing header row: {e}")))?
        .clone();
    if headers.is_empty() || headers[0].trim() != "timestamp" {
        return Err(Error::data(format!(
            "{provenance}: first column must be named `timestamp`, got `{}`",
            headers.get(0).unwrap_or("")
        )));
    }
    let names: Vec<String> = headers.iter().skip(1).map(|s| s.trim().to_string()).collect();
    let label_idx = names.iter().position(|n| n == "label");

    let mut timestamps = Vec::new();
    let mut labels: Vec<f64> = Vec::new();
    let mut columns: Vec<RawColumn> = names
        .iter()
        .enumerate()
        .filter(|(i, _)| Some(*i) != label_idx)
        .map(|(_, n)| RawColumn {
            name: n.clone(),
            values: Vec::new(),
            missing: Vec::new(),
        })
        .collect();

    for record in rdr.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "{provenance}: row {} has {} fields, header has {}",
                timestamps.len() + 2,
                record.len(),
                headers.len()
            )));
        }
        timestamps.push(parse_timestamp_ms(&record[0])?);
        let mut col_cursor = 0;
        for (i, cell) in record.iter().skip(1).enumerate() {
            if Some(i) == label_idx {
                let (v, missing) = parse_cell(cell);
                if missing {
                    return Err(Error::data(format!(
                        "{provenance}: missing label at row {}",
                        timestamps.len() + 1
                    )));
                }
                labels.push(v);
            } else {
                let (v, missing) = parse_cell(cell);
                columns[col_cursor].values.push(v);
                columns[col_cursor].missing.push(missing);
                col_cursor += 1;
            }
        }
    }

    if timestamps.is_empty() {
        return Err(Error::data(format!("{provenance}: zero data rows")));
    }
    if columns.is_empty() {
        return Err(Error::data(format!("{provenance}: no data columns")));
    }
    Ok(RawTable {
        timestamps_ms: timestamps,
        columns,
        labels: label_idx.map(|_| labels),
        provenance: provenance.to_string(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ingest_str(s: &str) -> Result<RawTable> {
        ingest_reader(s.as_bytes(), "test")
    }

    #[test]
    fn small_numeric_table() {
        let t = ingest_str("timestamp,a,b\n0,1.0,2\n10,1.5,3\n20,2.0,4\n").unwrap();
        assert_eq!(t.len(), 3);
        assert_eq!(t.columns.len(), 2);
        assert_eq!(t.columns[0].values, vec![1.0, 1.5, 2.0]);
        assert!(t.labels.is_none());
    }

    #[test]
    fn nan_and_empty_cells_flagged_missing() {
        let t = ingest_str("timestamp,a\n0,NaN\n10,\n20,5\n").unwrap();
        assert_eq!(t.columns[0].missing, vec![true, true, false]);
    }

    #[test]
    fn decimal_seconds_convert_to_ms() {
        let t = ingest_str("timestamp,a\n0.5,1\n1.0,2\n").unwrap();
        assert_eq!(t.timestamps_ms, vec![500, 1000]);
    }

    #[test]
    fn non_monotone_timestamps_accepted_at_ingest() {
        let t = ingest_str("timestamp,a\n20,1\n0,2\n10,3\n").unwrap();
        assert_eq!(t.timestamps_ms, vec![20, 0, 10]);
    }

    #[test]
    fn label_column_captured_separately() {
        let t = ingest_str("timestamp,a,label\n0,1,0\n10,2,1\n").unwrap();
        assert_eq!(t.columns.len(), 1);
        assert_eq!(t.labels, Some(vec![0.0, 1.0]));
    }

    #[test]
    fn contract_violations_rejected() {
        assert!(ingest_str("time,a\n0,1\n").is_err()); // wrong ts column name
        assert!(ingest_str("timestamp,a\n").is_err()); // zero rows
        assert!(ingest_str("timestamp,a\nx,1\n").is_err()); // bad timestamp
        let text_col = ingest_str("timestamp,a\n0,hello\n10,world\n").unwrap();
        assert!(text_col.columns[0].missing.iter().all(|&m| m));
    }
}

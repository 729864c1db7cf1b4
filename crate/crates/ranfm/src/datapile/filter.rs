//! Channel filtering: keep only numeric measurement channels, dropping
//! text columns, identifier-like columns, and sparse categorical codes.

use std::collections::BTreeSet;

use crate::datapile::types::{DroppedItem, RawTable};
use crate::error::{Error, Result};

/// Distinct-value budget for the categorical heuristic.
const CATEGORICAL_MAX_DISTINCT: usize = 10;
/// A column is categorical when its few distinct values cover under 1% of
/// the value range.
const CATEGORICAL_COVERAGE: f64 = 0.01;

fn is_identifier(values: &[f64]) -> bool {
    if values.len() < 2 {
        return false;
    }
    let mut seen = BTreeSet::new();
    for &v in values {
        if v.fract() != 0.0 || !v.is_finite() {
            return false;
        }
        if !seen.insert(v as i64) {
            return false; // repeated value: not an id sequence
        }
    }
    true
}

fn is_categorical(values: &[f64]) -> bool {
    let distinct: BTreeSet<u64> = values.iter().map(|v| v.to_bits()).collect();
    if distinct.len() > CATEGORICAL_MAX_DISTINCT {
        return false;
    }
    let min = values.iter().cloned().fold(f64::INFINITY, f64::min);
    let max = values.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
    let range = max - min;
    range > 0.0 && (distinct.len() as f64) < CATEGORICAL_COVERAGE * range
}

/// Drop non-numeric, identifier, and categorical columns. Returns the
/// filtered table and one report entry per dropped column.
pub fn filter_channels(table: &RawTable) -> Result<(RawTable, Vec<DroppedItem>)> {
    let mut kept = Vec::new();
    let mut dropped = Vec::new();
    for col in &table.columns {
        let observed: Vec<f64> = col.observed().collect();
        let reason = if observed.is_empty() {
            Some("non_numeric")
        } else if is_identifier(&observed) {
            Some("identifier")
        } else if is_categorical(&observed) {
            Some("categorical")
        } else {
            None
        };
        match reason {
            Some(r) => dropped.push(DroppedItem {
                item: format!("channel {}", col.name),
                reason: r.to_string(),
            }),
            None => kept.push(col.clone()),
        }
    }
    if kept.is_empty() {
        return Err(Error::data(format!(
            "{}: all channels dropped by filtering",
            table.provenance
        )));
    }
    Ok((
        RawTable {
            timestamps_ms: table.timestamps_ms.clone(),
            columns: kept,
            labels: table.labels.clone(),
            provenance: table.provenance.clone(),
        },
        dropped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapile::ingest::ingest_reader;

    #[test]
    fn text_column_dropped() {
        let t = ingest_reader(
            "timestamp,txt,kpi\n0,alpha,1.1\n10,beta,2.3\n20,gamma,1.9\n".as_bytes(),
            "f",
        )
        .unwrap();
        let (out, dropped) = filter_channels(&t).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert_eq!(out.columns[0].name, "kpi");
        assert_eq!(dropped[0].reason, "non_numeric");
    }

    #[test]
    fn incrementing_id_column_dropped() {
        let rows: String = (0..50).map(|i| format!("{},{},{}\n", i * 10, i + 1000, (i as f64 * 0.3).sin())).collect();
        let t = ingest_reader(format!("timestamp,id,kpi\n{rows}").as_bytes(), "f").unwrap();
        let (out, dropped) = filter_channels(&t).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert_eq!(dropped[0].item, "channel id");
        assert_eq!(dropped[0].reason, "identifier");
    }

    #[test]
    fn continuous_kpi_retained() {
        let rows: String = (0..50).map(|i| format!("{},{}\n", i, (i as f64 * 0.21).cos() * 3.0)).collect();
        let t = ingest_reader(format!("timestamp,kpi\n{rows}").as_bytes(), "f").unwrap();
        let (out, dropped) = filter_channels(&t).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert!(dropped.is_empty());
    }

    #[test]
    fn low_cardinality_kpi_like_cqi_retained() {
        // Integer values 0..15 with repeats: neither identifier nor
        // sparse-categorical (16 distinct over range 15).
        let rows: String = (0..64).map(|i| format!("{},{}\n", i, i % 16)).collect();
        let t = ingest_reader(format!("timestamp,cqi\n{rows}").as_bytes(), "f").unwrap();
        let (out, _) = filter_channels(&t).unwrap();
        assert_eq!(out.columns.len(), 1);
    }

    #[test]
    fn sparse_wide_range_codes_dropped_as_categorical() {
        // Two distinct values spread over a range of 1e6.
        let rows: String = (0..20)
            .map(|i| format!("{},{}\n", i, if i % 2 == 0 { 0.0 } else { 1_000_000.0 }))
            .collect();
        let t = ingest_reader(format!("timestamp,code\n{rows}").as_bytes(), "f").unwrap();
        // a second ordinary channel keeps the table non-empty
        let mut t2 = t.clone();
        t2.columns.push(crate::datapile::types::RawColumn {
            name: "kpi".into(),
            values: (0..20).map(|i| (i as f64).sin()).collect(),
            missing: vec![false; 20],
        });
        let (out, dropped) = filter_channels(&t2).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert_eq!(dropped[0].reason, "categorical");
    }

    #[test]
    fn all_columns_dropped_is_an_error() {
        let t = ingest_reader("timestamp,txt\n0,a\n1,b\n".as_bytes(), "f").unwrap();
        assert!(filter_channels(&t).is_err());
    }
}

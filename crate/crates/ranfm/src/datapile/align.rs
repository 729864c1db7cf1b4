//! Temporal consistency: find the dominant sampling period, keep the longest
//! reliably-spaced segment, and regularize its timestamps.

use std::collections::BTreeMap;

use crate::datapile::types::{DroppedItem, RawTable};
use crate::error::{Error, Result};

/// Dominant sampling period: the mode of successive differences
/// (smallest value on ties).
fn dominant_period(timestamps: &[i64]) -> Option<i64> {
    let mut counts: BTreeMap<i64, usize> = BTreeMap::new();
    for pair in timestamps.windows(2) {
        let d = pair[1] - pair[0];
        if d > 0 {
            *counts.entry(d).or_insert(0) += 1;
        }
    }
    counts
        .iter()
        .max_by(|a, b| a.1.cmp(b.1).then(b.0.cmp(a.0)))
        .map(|(&d, _)| d)
}

/// Keep the longest contiguous run whose every gap lies in [0.5Δ, 1.5Δ].
/// Rows closer than 0.5Δ to their predecessor (duplicates, backsteps) are
/// dropped inside a run; larger gaps split runs. Output timestamps are exact
/// multiples of Δ from the segment start.
pub fn align_temporal(table: &RawTable) -> Result<(RawTable, Vec<DroppedItem>)> {
    if table.len() < 2 {
        return Err(Error::data(format!(
            "{}: need at least 2 timestamps to align",
            table.provenance
        )));
    }
    let delta = dominant_period(&table.timestamps_ms).ok_or_else(|| {
        Error::data(format!(
            "{}: no positive timestamp differences",
            table.provenance
        ))
    })?;
    let lo = delta as f64 * 0.5;
    let hi = delta as f64 * 1.5;

    let mut report = Vec::new();
    let mut segments: Vec<Vec<usize>> = Vec::new();
    let mut current: Vec<usize> = vec![0];
    let mut dup_count = 0usize;
    for i in 1..table.len() {
        let gap = (table.timestamps_ms[i] - table.timestamps_ms[*current.last().unwrap()]) as f64;
        if gap < lo {
            dup_count += 1; // duplicate or out-of-order row
        } else if gap <= hi {
            current.push(i);
        } else {
            segments.push(std::mem::take(&mut current));
            current = vec![i];
        }
    }
    segments.push(current);
    if dup_count > 0 {
        report.push(DroppedItem {
            item: format!("{dup_count} rows"),
            reason: "duplicate_or_backward_timestamp".into(),
        });
    }

    // longest segment wins; earliest on ties
    let best = segments
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.len().cmp(&b.1.len()).then(b.0.cmp(&a.0)))
        .map(|(i, _)| i)
        .unwrap();
    for (i, seg) in segments.iter().enumerate() {
        if i != best && !seg.is_empty() {
            report.push(DroppedItem {
                item: format!("segment of {} rows", seg.len()),
                reason: "unsynchronized_segment".into(),
            });
        }
    }
    let keep = &segments[best];
    if keep.len() < 2 {
        return Err(Error::data(format!(
            "{}: no time-synchronized segment of length >= 2",
            table.provenance
        )));
    }

    let mut out = table.select_rows(keep);
    let t0 = out.timestamps_ms[0];
    for (j, ts) in out.timestamps_ms.iter_mut().enumerate() {
        *ts = t0 + j as i64 * delta;
    }
    Ok((out, report))
}

/// The regular sampling period of an aligned table.
pub fn sampling_period_ms(table: &RawTable) -> f64 {
    if table.len() < 2 {
        return 0.0;
    }
    (table.timestamps_ms[1] - table.timestamps_ms[0]) as f64
}

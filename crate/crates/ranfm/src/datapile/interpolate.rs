//! Sparse-trace handling: upsample short series onto a finer uniform grid.

use crate::datapile::types::RawTable;
use crate::error::{Error, Result};

/// Series shorter than this many samples are upsampled.
pub const DEFAULT_TARGET_MIN: usize = 1000;

/// If the table has fewer than `target_min` rows, resample every channel
/// onto a uniform grid of k·n points (k = ⌈target_min/n⌉) by linear
/// interpolation, endpoints preserved. Labels snap to the nearest original
/// row; a resampled cell flanked by a missing value stays missing.
pub fn interpolate_sparse(table: &RawTable, target_min: usize) -> Result<RawTable> {
    let n = table.len();
    if n < 2 {
        return Err(Error::data(format!(
            "{}: need at least 2 samples to interpolate",
            table.provenance
        )));
    }
    if n >= target_min {
        return Ok(table.clone());
    }
    let k = target_min.div_ceil(n);
    let n_new = k * n;
    // original sample index as a real position for each new grid point
    let pos = |j: usize| j as f64 * (n - 1) as f64 / (n_new - 1) as f64;

    let t0 = table.timestamps_ms[0] as f64;
    let t_last = *table.timestamps_ms.last().unwrap() as f64;
    let timestamps_ms: Vec<i64> = (0..n_new)
        .map(|j| (t0 + (t_last - t0) * j as f64 / (n_new - 1) as f64).round() as i64)
        .collect();

    let columns = table
        .columns
        .iter()
        .map(|col| {
            let mut values = Vec::with_capacity(n_new);
            let mut missing = Vec::with_capacity(n_new);
            for j in 0..n_new {
                let x = pos(j);
                let i0 = x.floor() as usize;
                let i1 = x.ceil() as usize;
                if col.missing[i0] || col.missing[i1] {
                    values.push(f64::NAN);
                    missing.push(true);
                } else if i0 == i1 {
                    values.push(col.values[i0]);
                    missing.push(false);
                } else {
                    let w = x - i0 as f64;
                    values.push(col.values[i0] * (1.0 - w) + col.values[i1] * w);
                    missing.push(false);
                }
            }
            crate::datapile::types::RawColumn {
                name: col.name.clone(),
                values,
                missing,
            }
        })
        .collect();

    let labels = table.labels.as_ref().map(|l| {
        (0..n_new)
            .map(|j| l[pos(j).round() as usize])
            .collect::<Vec<f64>>()
    });

    Ok(RawTable {
        timestamps_ms,
        columns,
        labels,
        provenance: table.provenance.clone(),
    })
}

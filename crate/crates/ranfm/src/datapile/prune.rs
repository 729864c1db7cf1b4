//! Channel pruning: remove constant, near-constant, and highly redundant
//! channels via correlation analysis.

use crate::datapile::types::{DroppedItem, RawTable};
use crate::error::{Error, Result};

pub const DEFAULT_SIGMA_REL_MIN: f64 = 1e-6;
pub const DEFAULT_CORR_MAX: f64 = 0.99;

fn observed_mean_std(values: &[f64], missing: &[bool]) -> (f64, f64, usize) {
    let mut n = 0usize;
    let mut mean = 0.0;
    for (v, &m) in values.iter().zip(missing) {
        if !m {
            mean += v;
            n += 1;
        }
    }
    if n == 0 {
        return (0.0, 0.0, 0);
    }
    mean /= n as f64;
    let mut var = 0.0;
    for (v, &m) in values.iter().zip(missing) {
        if !m {
            var += (v - mean) * (v - mean);
        }
    }
    (mean, (var / n as f64).sqrt(), n)
}

/// Pearson correlation over jointly observed samples; None when fewer than
/// two joint samples or either side is constant on the joint support.
pub fn pearson(
    a: &[f64],
    a_missing: &[bool],
    b: &[f64],
    b_missing: &[bool],
) -> Option<f64> {
    let mut xs = Vec::new();
    let mut ys = Vec::new();
    for i in 0..a.len() {
        if !a_missing[i] && !b_missing[i] {
            xs.push(a[i]);
            ys.push(b[i]);
        }
    }
    let n = xs.len();
    if n < 2 {
        return None;
    }
    let mx = xs.iter().sum::<f64>() / n as f64;
    let my = ys.iter().sum::<f64>() / n as f64;
    let mut sxy = 0.0;
    let mut sxx = 0.0;
    let mut syy = 0.0;
    for i in 0..n {
        let dx = xs[i] - mx;
        let dy = ys[i] - my;
        sxy += dx * dy;
        sxx += dx * dx;
        syy += dy * dy;
    }
    if sxx == 0.0 || syy == 0.0 {
        return None;
    }
    Some(sxy / (sxx * syy).sqrt())
}

/// Drop channels with relative std below `sigma_rel_min`, then drop the
/// later-indexed channel of every pair whose |Pearson r| over jointly
/// observed samples exceeds `corr_max`. Deterministic in channel order.
pub fn prune_channels(
    table: &RawTable,
    sigma_rel_min: f64,
    corr_max: f64,
) -> Result<(RawTable, Vec<DroppedItem>)> {
    if !(0.0 < sigma_rel_min && sigma_rel_min < 1.0) || !(0.0 < corr_max && corr_max < 1.0) {
        return Err(Error::Config(format!(
            "prune thresholds must lie in (0,1): sigma_rel_min={sigma_rel_min} corr_max={corr_max}"
        )));
    }
    let mut dropped = Vec::new();
    let mut keep: Vec<usize> = Vec::new();
    for (i, col) in table.columns.iter().enumerate() {
        let (mean, std, n) = observed_mean_std(&col.values, &col.missing);
        if n == 0 || std / (mean.abs() + 1.0) < sigma_rel_min {
            dropped.push(DroppedItem {
                item: format!("channel {}", col.name),
                reason: "near_constant".into(),
            });
        } else {
            keep.push(i);
        }
    }

    // correlation pass: later-indexed channel loses, earlier stays
    let mut kept_final: Vec<usize> = Vec::new();
    'candidates: for &j in &keep {
        for &i in &kept_final {
            let a = &table.columns[i];
            let b = &table.columns[j];
            if let Some(r) = pearson(&a.values, &a.missing, &b.values, &b.missing) {
                if r.abs() > corr_max {
                    dropped.push(DroppedItem {
                        item: format!("channel {}", b.name),
                        reason: format!("redundant_with {} (|r|={:.4})", a.name, r.abs()),
                    });
                    continue 'candidates;
                }
            }
        }
        kept_final.push(j);
    }

    if kept_final.is_empty() {
        return Err(Error::data(format!(
            "{}: all channels pruned",
            table.provenance
        )));
    }
    Ok((
        RawTable {
            timestamps_ms: table.timestamps_ms.clone(),
            columns: kept_final
                .iter()
                .map(|&i| table.columns[i].clone())
                .collect(),
            labels: table.labels.clone(),
            provenance: table.provenance.clone(),
        },
        dropped,
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::datapile::types::RawColumn;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    fn table_from(cols: Vec<(&str, Vec<f64>)>) -> RawTable {
        let n = cols[0].1.len();
        RawTable {
            timestamps_ms: (0..n as i64).collect(),
            columns: cols
                .into_iter()
                .map(|(name, values)| RawColumn {
                    name: name.into(),
                    missing: vec![false; values.len()],
                    values,
                })
                .collect(),
            labels: None,
            provenance: "t".into(),
        }
    }

    #[test]
    fn constant_channel_dropped() {
        let t = table_from(vec![
            ("flat", vec![4.0; 32]),
            ("kpi", (0..32).map(|i| (i as f64).sin()).collect()),
        ]);
        let (out, dropped) = prune_channels(&t, DEFAULT_SIGMA_REL_MIN, DEFAULT_CORR_MAX).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert_eq!(dropped[0].reason, "near_constant");
    }

    #[test]
    fn exact_duplicate_second_dropped() {
        let kpi: Vec<f64> = (0..32).map(|i| (i as f64 * 0.4).sin()).collect();
        let t = table_from(vec![("a", kpi.clone()), ("b", kpi)]);
        let (out, dropped) = prune_channels(&t, DEFAULT_SIGMA_REL_MIN, DEFAULT_CORR_MAX).unwrap();
        assert_eq!(out.columns.len(), 1);
        assert_eq!(out.columns[0].name, "a");
        assert!(dropped[0].reason.starts_with("redundant_with a"));
    }

    #[test]
    fn independent_noise_channels_both_kept() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let a: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = (0..1000).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = table_from(vec![("a", a.clone()), ("b", b.clone())]);
        let missing = vec![false; 1000];
        let r = pearson(&a, &missing, &b, &missing).unwrap();
        assert!(r.abs() < DEFAULT_CORR_MAX, "fixture correlation {r}");
        let (out, dropped) = prune_channels(&t, DEFAULT_SIGMA_REL_MIN, DEFAULT_CORR_MAX).unwrap();
        assert_eq!(out.columns.len(), 2);
        assert!(dropped.is_empty());
    }

    #[test]
    fn uncorrelated_with_kept_channels_survives() {
        // b duplicates a and is dropped; c is independent and must survive.
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let a: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let b: Vec<f64> = a.iter().map(|v| v + rng.gen_range(-1e-6..1e-6)).collect();
        let c: Vec<f64> = (0..500).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let t = table_from(vec![("a", a), ("b", b), ("c", c)]);
        let (out, dropped) = prune_channels(&t, DEFAULT_SIGMA_REL_MIN, DEFAULT_CORR_MAX).unwrap();
        let names: Vec<&str> = out.columns.iter().map(|c| c.name.as_str()).collect();
        assert_eq!(names, vec!["a", "c"]);
        assert_eq!(dropped.len(), 1);
    }

    #[test]
    fn all_pruned_is_error() {
        let t = table_from(vec![("x", vec![1.0; 8])]);
        assert!(prune_channels(&t, DEFAULT_SIGMA_REL_MIN, DEFAULT_CORR_MAX).is_err());
    }
}

//! Synthetic anomaly augmentation: short labeled disruptions injected into
//! clean traces while everything outside the segments stays bit-identical.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapile::types::{CuratedDataset, Labels};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum AnomalyKind {
    Spike,
    Drop,
    LevelShift,
    VarianceChange,
    Saturation,
}

/// One synthetic disruption: a `segment_len`-sample segment of the listed
/// channels, placed at a seed-determined random offset, with magnitude
/// `magnitude` in multiples of the channel's standard deviation.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AnomalySpec {
    pub kind: AnomalyKind,
    pub segment_len: usize,
    pub magnitude: f64,
    pub channels: Vec<usize>,
    pub seed: u64,
}

fn percentile_99(channel: &[f64]) -> f64 {
    let mut sorted = channel.to_vec();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = ((0.99 * sorted.len() as f64).ceil() as usize).clamp(1, sorted.len());
    sorted[rank - 1]
}

fn population_std(channel: &[f64]) -> f64 {
    let n = channel.len() as f64;
    let mean = channel.iter().sum::<f64>() / n;
    (channel.iter().map(|v| (v - mean) * (v - mean)).sum::<f64>() / n).sqrt()
}

/// Apply each spec at a random (seed-determined) segment start, set labels
/// to 1 exactly on the affected segments, and leave every other sample
/// bit-identical. Overlapping segments on the same channel are rejected.
pub fn inject_anomalies(d: &CuratedDataset, specs: &[AnomalySpec]) -> Result<CuratedDataset> {
    let t = d.len();
    let c = d.num_channels();
    let mut out = d.clone();
    let mut labels = vec![0u32; t];
    if let Some(Labels::PerTimestep(existing)) = &d.labels {
        labels.copy_from_slice(existing);
    }

    // per-channel occupation for the overlap check
    let mut occupied: Vec<Vec<(usize, usize)>> = vec![Vec::new(); c];
    // stds and percentiles from the original data
    let stds: Vec<f64> = (0..c).map(|ch| population_std(&d.channel(ch))).collect();
    let p99s: Vec<f64> = (0..c).map(|ch| percentile_99(&d.channel(ch))).collect();

    for (si, spec) in specs.iter().enumerate() {
        if spec.segment_len < 1 || spec.segment_len >= t {
            return Err(Error::Contract {
                op: "inject_anomalies",
                detail: format!("spec {si}: segment_len {} not in 1..{t}", spec.segment_len),
            });
        }
        if spec.magnitude <= 0.0 {
            return Err(Error::Contract {
                op: "inject_anomalies",
                detail: format!("spec {si}: magnitude must be positive"),
            });
        }
        for &ch in &spec.channels {
            if ch >= c {
                return Err(Error::IndexOutOfRange {
                    op: "inject_anomalies",
                    index: ch,
                    bound: c,
                });
            }
        }
        let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
        let start = rng.gen_range(0..=t - spec.segment_len);
        let end = start + spec.segment_len;
        for &ch in &spec.channels {
            for &(s0, e0) in &occupied[ch] {
                if start < e0 && s0 < end {
                    return Err(Error::Contract {
                        op: "inject_anomalies",
                        detail: format!(
                            "spec {si}: segment {start}..{end} overlaps {s0}..{e0} on channel {ch}"
                        ),
                    });
                }
            }
            occupied[ch].push((start, end));
        }

        for &ch in &spec.channels {
            let width = t;
            let seg: Vec<f64> = (start..end).map(|j| out.channels.at(ch, j)).collect();
            let local_mean = seg.iter().sum::<f64>() / seg.len() as f64;
            for (off, j) in (start..end).enumerate() {
                let idx = ch * width + j;
                let x = out.channels.get(idx);
                let y = match spec.kind {
                    AnomalyKind::Spike | AnomalyKind::LevelShift => {
                        x + spec.magnitude * stds[ch]
                    }
                    AnomalyKind::Drop => x - spec.magnitude * stds[ch],
                    AnomalyKind::VarianceChange => {
                        local_mean + (1.0 + spec.magnitude) * (seg[off] - local_mean)
                    }
                    AnomalyKind::Saturation => x.min(p99s[ch]),
                };
                out.channels.set(idx, y);
            }
        }
        for label in labels.iter_mut().take(end).skip(start) {
            *label = 1;
        }
    }

    out.labels = Some(Labels::PerTimestep(labels));
    Ok(out)
}

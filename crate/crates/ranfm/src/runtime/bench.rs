//! Latency/memory benchmark for single-window inference.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::model::{revin_normalize, Model};
use crate::tensor::Tensor;
use crate::training::pretrain::REVIN_EPS;

/// One benchmark measurement.
#[derive(Debug, Clone)]
pub struct BenchRow {
    pub window: usize,
    pub channels: usize,
    pub median_ms: f64,
    pub p95_ms: f64,
    pub peak_mb: f64,
}

/// Resident-set high-water mark in MB (VmHWM); 0 when unavailable.
fn peak_rss_mb() -> f64 {
    if let Ok(status) = std::fs::read_to_string("/proc/self/status") {
        for line in status.lines() {
            if let Some(rest) = line.strip_prefix("VmHWM:") {
                let kb: f64 = rest
                    .trim()
                    .trim_end_matches("kB")
                    .trim()
                    .parse()
                    .unwrap_or(0.0);
                return kb / 1024.0;
            }
        }
    }
    0.0
}

fn percentile(sorted_ms: &[f64], q: f64) -> f64 {
    let n = sorted_ms.len();
    let rank = ((q * n as f64).ceil() as usize).clamp(1, n);
    sorted_ms[rank - 1]
}

/// Median/p95 wall-clock per-window reconstruction latency and peak resident
/// memory delta for every requested (T, C) combination.
pub fn bench(
    model: &Model,
    windows: &[usize],
    channels: &[usize],
    repeat: usize,
) -> Result<Vec<BenchRow>> {
    if repeat < 3 {
        return Err(Error::Config(format!(
            "bench needs repeat >= 3, got {repeat}"
        )));
    }
    if windows.is_empty() || channels.is_empty() {
        return Err(Error::Config("bench needs at least one T and one C".into()));
    }
    let mut rows = Vec::with_capacity(windows.len() * channels.len());
    for &t in windows {
        if t < model.cfg.patch_len {
            return Err(Error::Config(format!(
                "window {t} shorter than patch length {}",
                model.cfg.patch_len
            )));
        }
        for &c in channels {
            let mut rng = ChaCha8Rng::seed_from_u64((t as u64) << 32 | c as u64);
            let vals: Vec<f64> = (0..c * t).map(|_| rng.gen_range(-1.0..1.0)).collect();
            let win = Tensor::from_f64(&[c, t], &vals, model.dtype())?;
            let (xn, _) = revin_normalize(&win, REVIN_EPS)?;

            // warmup run outside the measurement
            let _ = model.reconstruct_window(&xn)?;
            let before_mb = peak_rss_mb();
            let mut samples_ms = Vec::with_capacity(repeat);
            for _ in 0..repeat {
                let start = Instant::now();
                let out = model.reconstruct_window(&xn)?;
                let elapsed = start.elapsed().as_secs_f64() * 1e3;
                std::hint::black_box(&out);
                samples_ms.push(elapsed);
            }
            let after_mb = peak_rss_mb();
            samples_ms.sort_by(|a, b| a.partial_cmp(b).unwrap());
            rows.push(BenchRow {
                window: t,
                channels: c,
                median_ms: percentile(&samples_ms, 0.5),
                p95_ms: percentile(&samples_ms, 0.95),
                peak_mb: (after_mb - before_mb).max(0.0),
            });
        }
    }
    Ok(rows)
}

/// CSV serialization: header `T,C,median_ms,p95_ms,peak_mb`.
pub fn bench_csv(rows: &[BenchRow]) -> String {
    let mut out = String::from("T,C,median_ms,p95_ms,peak_mb\n");
    for r in rows {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.3}\n",
            r.window, r.channels, r.median_ms, r.p95_ms, r.peak_mb
        ));
    }
    out
}

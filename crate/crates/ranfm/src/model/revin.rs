//! Reversible instance normalization.
//!
//! Per-window, per-channel standardization whose statistics are kept and
//! inverted on model outputs. Statistics-only form: no learnable affine
//! terms.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-channel normalization statistics for one window.
#[derive(Debug, Clone, PartialEq)]
pub struct NormStats {
    pub mean: Vec<f64>,
    /// Population standard deviation, floored at `eps`.
    pub std: Vec<f64>,
    pub eps: f64,
}

impl NormStats {
    pub fn channels(&self) -> usize {
        self.mean.len()
    }
}

/// Normalize each channel of a C×T window to zero mean and unit variance,
/// flooring the population std at `eps`. Returns the normalized window and
/// the statistics needed to invert it.
pub fn revin_normalize(x: &Tensor, eps: f64) -> Result<(Tensor, NormStats)> {
    if x.shape().len() != 2 {
        return Err(Error::InvalidDimension {
            op: "revin_normalize",
            detail: format!("expected C×T matrix, got {:?}", x.shape()),
        });
    }
    if eps <= 0.0 {
        return Err(Error::InvalidDimension {
            op: "revin_normalize",
            detail: format!("eps must be positive, got {eps}"),
        });
    }
    if !x.is_all_finite() {
        return Err(Error::NonFinite("revin_normalize"));
    }
    let (c, t) = (x.shape()[0], x.shape()[1]);
    let mut mean = Vec::with_capacity(c);
    let mut std = Vec::with_capacity(c);
    let mut out = Tensor::zeros(x.shape(), x.dtype());
    for ch in 0..c {
        let mut m = 0.0;
        for j in 0..t {
            m += x.get(ch * t + j);
        }
        m /= t as f64;
        let mut var = 0.0;
        for j in 0..t {
            let d = x.get(ch * t + j) - m;
            var += d * d;
        }
        var /= t as f64;
        let s = var.sqrt().max(eps);
        for j in 0..t {
            out.set(ch * t + j, (x.get(ch * t + j) - m) / s);
        }
        mean.push(m);
        std.push(s);
    }
    Ok((out, NormStats { mean, std, eps }))
}

/// Invert [`revin_normalize`]: per channel, ŷ·std + mean. The width may
/// differ from the stats window (forecast horizons), the channel count may
/// not.
pub fn revin_denormalize(y: &Tensor, stats: &NormStats) -> Result<Tensor> {
    if y.shape().len() != 2 || y.shape()[0] != stats.channels() {
        return Err(Error::ShapeMismatch {
            op: "revin_denormalize",
            lhs: y.shape().to_vec(),
            rhs: vec![stats.channels()],
        });
    }
    let (c, t) = (y.shape()[0], y.shape()[1]);
    let mut out = Tensor::zeros(y.shape(), y.dtype());
    for ch in 0..c {
        for j in 0..t {
            out.set(ch * t + j, y.get(ch * t + j) * stats.std[ch] + stats.mean[ch]);
        }
    }
    Ok(out)
}

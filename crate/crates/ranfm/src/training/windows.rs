//! Strided window extraction and size-aware dataset sampling.

use crate::datapile::CuratedDataset;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Window start offsets 0, s, 2s, … while offset+T ≤ length.
pub fn window_offsets(len: usize, window: usize, stride: usize) -> Result<Vec<usize>> {
    if window == 0 || stride == 0 {
        return Err(Error::Config("window and stride must be positive".into()));
    }
    if len < window {
        return Err(Error::data(format!(
            "series length {len} shorter than window {window}"
        )));
    }
    Ok((0..=len - window).step_by(stride).collect())
}

/// The C×T window starting at `offset`.
pub fn extract_window(data: &Tensor, offset: usize, window: usize) -> Result<Tensor> {
    let (c, len) = (data.shape()[0], data.shape()[1]);
    if offset + window > len {
        return Err(Error::IndexOutOfRange {
            op: "extract_window",
            index: offset + window,
            bound: len,
        });
    }
    let mut flat = Vec::with_capacity(c * window);
    for ch in 0..c {
        for j in offset..offset + window {
            flat.push(data.at(ch, j));
        }
    }
    Tensor::from_f64(&[c, window], &flat, data.dtype())
}

/// Deterministic sequence of C×T windows over a dataset.
pub fn window_iter<'a>(
    dataset: &'a CuratedDataset,
    window: usize,
    stride: usize,
) -> Result<impl Iterator<Item = Tensor> + 'a> {
    let offsets = window_offsets(dataset.len(), window, stride)?;
    Ok(offsets
        .into_iter()
        .map(move |o| extract_window(&dataset.channels, o, window).expect("offset validated")))
}

/// Inverse-size sampling weights: w_i = (1/n_i) / Σ(1/n_j).
pub fn dataset_weights(sizes: &[usize]) -> Result<Vec<f64>> {
    if sizes.is_empty() {
        return Err(Error::contract("dataset_weights", "empty size list"));
    }
    if sizes.contains(&0) {
        return Err(Error::contract("dataset_weights", "zero-sized dataset"));
    }
    let inv: Vec<f64> = sizes.iter().map(|&n| 1.0 / n as f64).collect();
    let total: f64 = inv.iter().sum();
    Ok(inv.into_iter().map(|v| v / total).collect())
}

/// Stride bucket by total sample count: finer strides for smaller datasets.
pub fn stride_for_size(n_samples: usize) -> usize {
    if n_samples < 100_000 {
        1
    } else if n_samples < 1_000_000 {
        2
    } else {
        4
    }
}

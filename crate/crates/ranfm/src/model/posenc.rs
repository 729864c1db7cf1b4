//! Sinusoidal absolute positional encoding.
//!
//! The position index is the temporal patch index i, shared across channels:
//! patches observed at the same time carry the same position regardless of
//! which channel they belong to.

use crate::error::{Error, Result};
use crate::model::patching::TokenSequence;
use crate::ops;
use crate::tensor::{DType, Tensor};

/// PE(pos) with PE[2j] = sin(pos/10000^(2j/d)), PE[2j+1] = cos(pos/10000^(2j/d)).
pub fn encoding_row(pos: usize, d: usize) -> Vec<f64> {
    let mut row = vec![0.0; d];
    for j in 0..d / 2 {
        let denom = 10000f64.powf(2.0 * j as f64 / d as f64);
        let angle = pos as f64 / denom;
        row[2 * j] = angle.sin();
        row[2 * j + 1] = angle.cos();
    }
    row
}

/// Positional encodings for patch indices 0..n_pos as an n_pos×d tensor.
pub fn encoding_table(n_pos: usize, d: usize, dtype: DType) -> Result<Tensor> {
    if d % 2 != 0 {
        return Err(Error::InvalidDimension {
            op: "positional_encode",
            detail: format!("embedding width {d} must be even"),
        });
    }
    let mut flat = Vec::with_capacity(n_pos * d);
    for pos in 0..n_pos {
        flat.extend(encoding_row(pos, d));
    }
    Tensor::from_f64(&[n_pos, d], &flat, dtype)
}

/// The per-token PE matrix for a C-channel sequence: the N-row table tiled
/// once per channel, matching channel-major token order.
pub fn tiled_table(channels: usize, n_pos: usize, d: usize, dtype: DType) -> Result<Tensor> {
    let table = encoding_table(n_pos, d, dtype)?;
    let parts: Vec<&Tensor> = (0..channels).map(|_| &table).collect();
    ops::concat_rows(&parts)
}

/// Add PE(pos = patch index) to every token embedding.
pub fn positional_encode(seq: &TokenSequence) -> Result<TokenSequence> {
    let d = seq.width();
    let pe = tiled_table(
        seq.channels,
        seq.patches_per_channel,
        d,
        seq.embeddings.dtype(),
    )?;
    Ok(TokenSequence {
        embeddings: ops::add(&seq.embeddings, &pe)?,
        masked: seq.masked.clone(),
        channels: seq.channels,
        patches_per_channel: seq.patches_per_channel,
    })
}

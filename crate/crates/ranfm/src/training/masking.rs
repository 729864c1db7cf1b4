//! Mask selection and the masked reconstruction loss.

use rand::Rng;

use crate::error::{Error, Result};
use crate::model::TokenLayout;
use crate::tensor::Tensor;

/// Draw exactly round(ratio·n) distinct token indices uniformly without
/// replacement. Deterministic given the rng state; returned sorted.
pub fn select_mask_indices(n_tokens: usize, ratio: f64, rng: &mut impl Rng) -> Result<Vec<usize>> {
    if n_tokens == 0 {
        return Err(Error::contract("select_mask_indices", "no tokens"));
    }
    if !(0.0..=1.0).contains(&ratio) {
        return Err(Error::Config(format!(
            "mask ratio must lie in [0,1], got {ratio}"
        )));
    }
    let count = (ratio * n_tokens as f64).round() as usize;
    let mut indices = rand::seq::index::sample(rng, n_tokens, count).into_vec();
    indices.sort_unstable();
    Ok(indices)
}

/// Flat sample positions (into a C×(N·P) matrix) covered by the masked
/// tokens: token c·N+i covers samples i·P..(i+1)·P of channel c.
pub fn masked_sample_positions(
    mask_tokens: &[usize],
    layout: TokenLayout,
    patch_len: usize,
) -> Vec<usize> {
    let n = layout.num_patches;
    let row_width = n * patch_len;
    let mut out = Vec::with_capacity(mask_tokens.len() * patch_len);
    for &t in mask_tokens {
        let c = t / n;
        let i = t % n;
        let base = c * row_width + i * patch_len;
        out.extend(base..base + patch_len);
    }
    out
}

/// Mean squared error over exactly the masked sample positions, in
/// normalized space. Positions are flat indices into the C×T matrices.
pub fn masked_mse(x: &Tensor, xhat: &Tensor, positions: &[usize]) -> Result<f64> {
    if positions.is_empty() {
        return Err(Error::contract("masked_mse", "empty masked position set"));
    }
    if x.shape() != xhat.shape() {
        return Err(Error::ShapeMismatch {
            op: "masked_mse",
            lhs: x.shape().to_vec(),
            rhs: xhat.shape().to_vec(),
        });
    }
    let n = x.numel();
    let mut acc = 0.0;
    for &p in positions {
        if p >= n {
            return Err(Error::IndexOutOfRange {
                op: "masked_mse",
                index: p,
                bound: n,
            });
        }
        let d = x.get(p) - xhat.get(p);
        acc += d * d;
    }
    Ok(acc / positions.len() as f64)
}

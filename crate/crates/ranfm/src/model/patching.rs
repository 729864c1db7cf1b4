//! Patch extraction, projection into token embeddings, and mask application.

use crate::error::{Error, Result};
use crate::ops;
use crate::tensor::Tensor;

/// Non-overlapping patches of a C×T window, stored channel-major as a
/// (C·N)×P matrix: row c·N + i is patch i of channel c.
#[derive(Debug, Clone)]
pub struct PatchGrid {
    pub channels: usize,
    pub num_patches: usize,
    pub patch_len: usize,
    data: Tensor,
}

impl PatchGrid {
    /// The (C·N)×P patch matrix.
    pub fn matrix(&self) -> &Tensor {
        &self.data
    }

    pub fn patch(&self, c: usize, i: usize) -> Vec<f64> {
        let row = c * self.num_patches + i;
        (0..self.patch_len)
            .map(|j| self.data.get(row * self.patch_len + j))
            .collect()
    }
}

/// Channel-major token sequence flowing through the encoder, with per-token
/// mask flags. Token c·N + i holds patch i of channel c.
#[derive(Debug, Clone)]
pub struct TokenSequence {
    pub embeddings: Tensor,
    pub masked: Vec<bool>,
    pub channels: usize,
    pub patches_per_channel: usize,
}

impl TokenSequence {
    pub fn num_tokens(&self) -> usize {
        self.channels * self.patches_per_channel
    }

    pub fn token_index(&self, channel: usize, patch: usize) -> usize {
        channel * self.patches_per_channel + patch
    }

    pub fn channel_of(&self, token: usize) -> usize {
        token / self.patches_per_channel
    }

    pub fn patch_of(&self, token: usize) -> usize {
        token % self.patches_per_channel
    }

    pub fn width(&self) -> usize {
        self.embeddings.cols()
    }
}

/// Split each channel into N = ⌊T/P⌋ contiguous patches, dropping the
/// trailing T − N·P samples.
pub fn patchify(x: &Tensor, patch_len: usize) -> Result<PatchGrid> {
    if x.shape().len() != 2 {
        return Err(Error::InvalidDimension {
            op: "patchify",
            detail: format!("expected C×T matrix, got {:?}", x.shape()),
        });
    }
    let (c, t) = (x.shape()[0], x.shape()[1]);
    if patch_len == 0 || t < patch_len {
        return Err(Error::InvalidDimension {
            op: "patchify",
            detail: format!("window length {t} shorter than patch length {patch_len}"),
        });
    }
    let n = t / patch_len;
    let mut flat = Vec::with_capacity(c * n * patch_len);
    for ch in 0..c {
        for i in 0..n {
            for j in 0..patch_len {
                flat.push(x.get(ch * t + i * patch_len + j));
            }
        }
    }
    Ok(PatchGrid {
        channels: c,
        num_patches: n,
        patch_len,
        data: Tensor::from_f64(&[c * n, patch_len], &flat, x.dtype())?,
    })
}

/// Project each patch through the trainable linear layer:
/// e = patch·W + bias, tokens ordered channel-major.
pub fn project_patches(patches: &PatchGrid, weight: &Tensor, bias: &Tensor) -> Result<TokenSequence> {
    let projected = ops::add_row_broadcast(&ops::matmul(patches.matrix(), weight)?, bias)?;
    Ok(TokenSequence {
        embeddings: projected,
        masked: vec![false; patches.channels * patches.num_patches],
        channels: patches.channels,
        patches_per_channel: patches.num_patches,
    })
}

/// Replace the embeddings at `indices` with the mask token and flag them;
/// all other tokens are untouched.
pub fn apply_mask(seq: &TokenSequence, indices: &[usize], mask_token: &Tensor) -> Result<TokenSequence> {
    let d = seq.width();
    if mask_token.numel() != d {
        return Err(Error::ShapeMismatch {
            op: "apply_mask",
            lhs: seq.embeddings.shape().to_vec(),
            rhs: mask_token.shape().to_vec(),
        });
    }
    let n = seq.num_tokens();
    let mut out = seq.clone();
    for &i in indices {
        if i >= n {
            return Err(Error::IndexOutOfRange {
                op: "apply_mask",
                index: i,
                bound: n,
            });
        }
        for j in 0..d {
            out.embeddings.set(i * d + j, mask_token.get(j));
        }
        out.masked[i] = true;
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::tensor::DType;

    fn t64(shape: &[usize], v: &[f64]) -> Tensor {
        Tensor::from_f64(shape, v, DType::F64).unwrap()
    }

    #[test]
    fn default_window_patch_counts() {
        let x = Tensor::zeros(&[1, 512], DType::F64);
        let grid = patchify(&x, 8).unwrap();
        assert_eq!(grid.num_patches, 64);
    }

    #[test]
    fn single_patch_equals_channel() {
        let x = t64(&[1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let grid = patchify(&x, 4).unwrap();
        assert_eq!(grid.num_patches, 1);
        assert_eq!(grid.patch(0, 0), vec![1.0, 2.0, 3.0, 4.0]);
    }

    #[test]
    fn trailing_samples_dropped() {
        let x = t64(&[1, 10], &(0..10).map(|v| v as f64).collect::<Vec<_>>());
        let grid = patchify(&x, 8).unwrap();
        assert_eq!(grid.num_patches, 1);
        assert_eq!(grid.patch(0, 0), (0..8).map(|v| v as f64).collect::<Vec<_>>());
    }

    #[test]
    fn window_shorter_than_patch_rejected() {
        let x = Tensor::zeros(&[1, 4], DType::F64);
        assert!(patchify(&x, 8).is_err());
    }

    #[test]
    fn flat_reassembly_is_identity_prefix() {
        let x = t64(&[2, 5], &(0..10).map(|v| v as f64).collect::<Vec<_>>());
        let grid = patchify(&x, 2).unwrap();
        // channel-major rows flatten back to the first N*P samples per channel
        let m = grid.matrix();
        for c in 0..2 {
            for s in 0..4 {
                assert_eq!(m.get(c * 4 + s), x.get(c * 5 + s));
            }
        }
    }

    #[test]
    fn zero_patches_project_to_bias() {
        let x = Tensor::zeros(&[1, 4], DType::F64);
        let grid = patchify(&x, 2).unwrap();
        let w = Tensor::zeros(&[2, 3], DType::F64);
        let b = t64(&[3], &[0.5, -1.0, 2.0]);
        let seq = project_patches(&grid, &w, &b).unwrap();
        assert_eq!(seq.embeddings.to_f64_vec(), vec![0.5, -1.0, 2.0, 0.5, -1.0, 2.0]);
    }

    #[test]
    fn identity_projection_passes_patch_through() {
        let x = t64(&[1, 2], &[3.0, -1.0]);
        let grid = patchify(&x, 2).unwrap();
        let w = Tensor::identity(2, DType::F64);
        let b = Tensor::zeros(&[2], DType::F64);
        let seq = project_patches(&grid, &w, &b).unwrap();
        assert_eq!(seq.embeddings.to_f64_vec(), vec![3.0, -1.0]);
    }

    #[test]
    fn hand_projection_example() {
        // patch [1,1] through W=[[1,0],[1,0]] -> [2,0]
        let x = t64(&[1, 2], &[1.0, 1.0]);
        let grid = patchify(&x, 2).unwrap();
        let w = t64(&[2, 2], &[1.0, 0.0, 1.0, 0.0]);
        let b = Tensor::zeros(&[2], DType::F64);
        let seq = project_patches(&grid, &w, &b).unwrap();
        assert_eq!(seq.embeddings.to_f64_vec(), vec![2.0, 0.0]);
    }

    #[test]
    fn token_index_maps_are_bijective() {
        let seq = TokenSequence {
            embeddings: Tensor::zeros(&[6, 2], DType::F64),
            masked: vec![false; 6],
            channels: 2,
            patches_per_channel: 3,
        };
        let mut seen = std::collections::HashSet::new();
        for c in 0..2 {
            for i in 0..3 {
                let t = seq.token_index(c, i);
                assert_eq!(seq.channel_of(t), c);
                assert_eq!(seq.patch_of(t), i);
                assert!(seen.insert(t));
            }
        }
        assert_eq!(seen.len(), 6);
    }

    #[test]
    fn mask_empty_set_is_identity() {
        let x = t64(&[1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let grid = patchify(&x, 2).unwrap();
        let seq = project_patches(&grid, &Tensor::identity(2, DType::F64), &Tensor::zeros(&[2], DType::F64)).unwrap();
        let masked = apply_mask(&seq, &[], &t64(&[2], &[9.0, 9.0])).unwrap();
        assert!(masked.embeddings.bits_eq(&seq.embeddings));
        assert!(masked.masked.iter().all(|&m| !m));
    }

    #[test]
    fn mask_all_replaces_every_row() {
        let x = t64(&[1, 4], &[1.0, 2.0, 3.0, 4.0]);
        let grid = patchify(&x, 2).unwrap();
        let seq = project_patches(&grid, &Tensor::identity(2, DType::F64), &Tensor::zeros(&[2], DType::F64)).unwrap();
        let tok = t64(&[2], &[9.0, 8.0]);
        let masked = apply_mask(&seq, &[0, 1], &tok).unwrap();
        assert_eq!(masked.embeddings.to_f64_vec(), vec![9.0, 8.0, 9.0, 8.0]);
        assert!(masked.masked.iter().all(|&m| m));
    }

    #[test]
    fn mask_single_index_flags_exactly_one() {
        let seq = TokenSequence {
            embeddings: Tensor::zeros(&[4, 2], DType::F64),
            masked: vec![false; 4],
            channels: 2,
            patches_per_channel: 2,
        };
        let masked = apply_mask(&seq, &[2], &t64(&[2], &[1.0, 1.0])).unwrap();
        assert_eq!(masked.masked, vec![false, false, true, false]);
        assert!(apply_mask(&seq, &[4], &t64(&[2], &[1.0, 1.0])).is_err());
    }
}

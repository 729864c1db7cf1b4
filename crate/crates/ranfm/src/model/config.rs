//! Architecture hyperparameters.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::ops::Activation;

/// Named capacity presets. `Custom` covers everything else.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    Small,
    Base,
    Large,
    Custom,
}

/// Encoder and head hyperparameters.
///
/// `embed_dim` must divide evenly into `num_heads`; patches are
/// `patch_len`-sample slices of a `window_len`-sample window, giving
/// `window_len / patch_len` (floored) patches per channel.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    /// Encoder layer count (L).
    pub layers: usize,
    /// Embedding width (d).
    pub embed_dim: usize,
    /// Attention heads (B).
    pub num_heads: usize,
    /// Feed-forward width (d_ff).
    pub ff_dim: usize,
    /// Observation window length in samples (T).
    pub window_len: usize,
    /// Patch length in samples (P).
    pub patch_len: usize,
    /// Linear layers per task head (M).
    pub head_layers: usize,
    pub activation: Activation,
    pub variant: Variant,
}

impl ModelConfig {
    pub fn small() -> Self {
        ModelConfig {
            layers: 6,
            embed_dim: 512,
            num_heads: 8,
            ff_dim: 2048,
            window_len: 512,
            patch_len: 8,
            head_layers: 2,
            activation: Activation::Relu,
            variant: Variant::Small,
        }
    }

    pub fn base() -> Self {
        ModelConfig {
            layers: 12,
            embed_dim: 768,
            num_heads: 12,
            ff_dim: 3072,
            window_len: 512,
            patch_len: 8,
            head_layers: 2,
            activation: Activation::Relu,
            variant: Variant::Base,
        }
    }

    pub fn large() -> Self {
        ModelConfig {
            layers: 24,
            embed_dim: 1024,
            num_heads: 16,
            ff_dim: 4096,
            window_len: 512,
            patch_len: 8,
            head_layers: 2,
            activation: Activation::Relu,
            variant: Variant::Large,
        }
    }

    /// Patches per channel: N = ⌊T/P⌋.
    pub fn num_patches(&self) -> usize {
        self.window_len / self.patch_len
    }

    /// Per-head attention width d/B.
    pub fn head_dim(&self) -> usize {
        self.embed_dim / self.num_heads
    }

    pub fn validate(&self) -> Result<()> {
        if self.embed_dim == 0 || self.num_heads == 0 || self.ff_dim == 0 {
            return Err(Error::Config("zero-sized model dimension".into()));
        }
        if self.embed_dim % self.num_heads != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} not divisible by num_heads {}",
                self.embed_dim, self.num_heads
            )));
        }
        if self.embed_dim % 2 != 0 {
            return Err(Error::Config(format!(
                "embed_dim {} must be even for sinusoidal positional encoding",
                self.embed_dim
            )));
        }
        if self.patch_len == 0 || self.window_len < self.patch_len {
            return Err(Error::Config(format!(
                "window_len {} must be >= patch_len {} >= 1",
                self.window_len, self.patch_len
            )));
        }
        if self.num_patches() < 1 {
            return Err(Error::Config("window shorter than one patch".into()));
        }
        if self.head_layers < 1 {
            return Err(Error::Config("head_layers must be >= 1".into()));
        }
        Ok(())
    }
}

//! Masked self-supervised pretraining and the adaptation regimes, with the
//! optimizer, schedule, clipping, strided windowing, and size-aware dataset
//! sampling.

pub mod finetune;
pub mod masking;
pub mod optimizer;
pub mod pretrain;
pub mod schedule;
pub mod windows;

pub use finetune::{finetune, FinetuneOutcome, FinetuneTask};
pub use masking::{masked_mse, masked_sample_positions, select_mask_indices};
pub use optimizer::{adamw_step, clip_gradients, GradientMap, OptimizerState};
pub use pretrain::{masked_step, pretrain, write_loss_csv, LossPoint, PretrainOutcome, REVIN_EPS};
pub use schedule::cosine_lr;
pub use windows::{dataset_weights, extract_window, stride_for_size, window_iter, window_offsets};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Adaptation regime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Regime {
    Pretrain,
    /// End-to-end fine-tuning: every parameter trainable.
    FullFinetune,
    /// Linear probing: encoder, projection, mask token, and positional
    /// machinery frozen; only head parameters update.
    LinearProbe,
    /// No updates at all; inference with the pretrained reconstruction head.
    ZeroShot,
}

impl std::str::FromStr for Regime {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "pretrain" => Ok(Regime::Pretrain),
            "ff" | "full_finetune" => Ok(Regime::FullFinetune),
            "lp" | "linear_probe" => Ok(Regime::LinearProbe),
            "zero" | "zero_shot" => Ok(Regime::ZeroShot),
            other => Err(Error::Config(format!("unknown regime `{other}`"))),
        }
    }
}

/// Optimization hyperparameters.
///
/// Defaults: decoupled decay 0.05, betas 0.9/0.999, clip 5.0, cosine
/// schedule 1e-4 → 1e-5, 30% masking, strides {1,2,4}, desk-scale batch
/// size and step count.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub mask_ratio: f64,
    pub weight_decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps_opt: f64,
    pub clip_norm: f64,
    pub batch_size: usize,
    pub lr_max: f64,
    pub lr_min: f64,
    pub total_steps: usize,
    pub strides: Vec<usize>,
    pub seed: u64,
    pub regime: Regime,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            mask_ratio: 0.30,
            weight_decay: 0.05,
            beta1: 0.9,
            beta2: 0.999,
            eps_opt: 1e-8,
            clip_norm: 5.0,
            batch_size: 32,
            lr_max: 1e-4,
            lr_min: 1e-5,
            total_steps: 300,
            strides: vec![1, 2, 4],
            seed: 0,
            regime: Regime::Pretrain,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.mask_ratio) {
            return Err(Error::Config(format!(
                "mask_ratio must lie in [0,1], got {}",
                self.mask_ratio
            )));
        }
        for (name, b) in [("beta1", self.beta1), ("beta2", self.beta2)] {
            if !(0.0 < b && b < 1.0) {
                return Err(Error::Config(format!("{name} must lie in (0,1), got {b}")));
            }
        }
        if self.clip_norm <= 0.0 {
            return Err(Error::Config("clip_norm must be positive".into()));
        }
        if !(self.lr_max >= self.lr_min && self.lr_min > 0.0) {
            return Err(Error::Config(format!(
                "need lr_max >= lr_min > 0, got {} < {}",
                self.lr_max, self.lr_min
            )));
        }
        if self.batch_size == 0 || self.total_steps == 0 {
            return Err(Error::Config("batch_size and total_steps must be positive".into()));
        }
        if self.strides.is_empty() || self.strides.contains(&0) {
            return Err(Error::Config("strides must be positive".into()));
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_recipe_values() {
        let cfg = TrainConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.mask_ratio, 0.30);
        assert_eq!(cfg.weight_decay, 0.05);
        assert_eq!(cfg.beta1, 0.9);
        assert_eq!(cfg.beta2, 0.999);
        assert_eq!(cfg.clip_norm, 5.0);
        assert_eq!(cfg.lr_max, 1e-4);
        assert_eq!(cfg.lr_min, 1e-5);
        assert_eq!(cfg.strides, vec![1, 2, 4]);
    }

    #[test]
    fn invalid_configs_rejected() {
        let mut c = TrainConfig::default();
        c.mask_ratio = 1.5;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.beta2 = 1.0;
        assert!(c.validate().is_err());
        let mut c = TrainConfig::default();
        c.lr_min = 2e-4;
        assert!(c.validate().is_err());
    }

    #[test]
    fn regime_parsing() {
        assert_eq!("ff".parse::<Regime>().unwrap(), Regime::FullFinetune);
        assert_eq!("lp".parse::<Regime>().unwrap(), Regime::LinearProbe);
        assert_eq!("zero".parse::<Regime>().unwrap(), Regime::ZeroShot);
        assert!("warmup".parse::<Regime>().is_err());
    }
}

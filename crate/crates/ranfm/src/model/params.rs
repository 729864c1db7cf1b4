//! Named learnable tensors, their initialization, and counting.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::config::ModelConfig;
use crate::tensor::{DType, Tensor};

/// Which task heads a parameter set carries alongside the encoder.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct HeadSpec {
    /// Reconstruction head d→…→P (pretraining, anomaly scoring, imputation).
    pub reconstruction: bool,
    /// Forecast head N·d→…→H with weights shared across channels.
    pub forecast_horizon: Option<usize>,
    /// Classification head d→…→K.
    pub num_classes: Option<usize>,
}

impl HeadSpec {
    pub fn none() -> Self {
        HeadSpec {
            reconstruction: false,
            forecast_horizon: None,
            num_classes: None,
        }
    }

    pub fn reconstruction() -> Self {
        HeadSpec {
            reconstruction: true,
            forecast_horizon: None,
            num_classes: None,
        }
    }
}

/// All named learnable tensors of one model. Iteration order is the sorted
/// name order, which keeps every whole-set operation deterministic.
#[derive(Debug, Clone)]
pub struct ParameterSet {
    tensors: BTreeMap<String, Tensor>,
}

impl ParameterSet {
    pub fn get(&self, name: &str) -> Result<&Tensor> {
        self.tensors
            .get(name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub fn get_mut(&mut self, name: &str) -> Result<&mut Tensor> {
        self.tensors
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("missing parameter `{name}`")))
    }

    pub fn insert(&mut self, name: String, tensor: Tensor) {
        self.tensors.insert(name, tensor);
    }

    pub fn contains(&self, name: &str) -> bool {
        self.tensors.contains_key(name)
    }

    pub fn names(&self) -> impl Iterator<Item = &str> {
        self.tensors.keys().map(|s| s.as_str())
    }

    pub fn iter(&self) -> impl Iterator<Item = (&str, &Tensor)> {
        self.tensors.iter().map(|(k, v)| (k.as_str(), v))
    }

    pub fn iter_mut(&mut self) -> impl Iterator<Item = (&str, &mut Tensor)> {
        self.tensors.iter_mut().map(|(k, v)| (k.as_str(), v))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count across all tensors.
    pub fn scalar_count(&self) -> usize {
        self.tensors.values().map(|t| t.numel()).sum()
    }

    pub fn dtype(&self) -> DType {
        self.tensors
            .values()
            .next()
            .map(|t| t.dtype())
            .unwrap_or(DType::F32)
    }

    pub fn cast(&self, dtype: DType) -> ParameterSet {
        ParameterSet {
            tensors: self
                .tensors
                .iter()
                .map(|(k, v)| (k.clone(), v.cast(dtype)))
                .collect(),
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors.values().all(|t| t.is_all_finite())
    }

    /// FNV-1a hash over the selected tensors' names, shapes, and raw bits.
    /// Equal hashes across training steps certify frozen parameters.
    pub fn fingerprint<F: Fn(&str) -> bool>(&self, select: F) -> u64 {
        let mut h: u64 = 0xcbf29ce484222325;
        let mut eat = |byte: u8| {
            h ^= byte as u64;
            h = h.wrapping_mul(0x100000001b3);
        };
        for (name, tensor) in &self.tensors {
            if !select(name) {
                continue;
            }
            for b in name.as_bytes() {
                eat(*b);
            }
            for &d in tensor.shape() {
                for b in (d as u64).to_le_bytes() {
                    eat(b);
                }
            }
            for i in 0..tensor.numel() {
                for b in tensor.get(i).to_bits().to_le_bytes() {
                    eat(b);
                }
            }
        }
        h
    }
}

/// Hidden width used between stacked head layers.
fn head_layer_shapes(input: usize, hidden: usize, output: usize, depth: usize) -> Vec<(usize, usize)> {
    let mut shapes = Vec::with_capacity(depth);
    for i in 0..depth {
        let in_w = if i == 0 { input } else { hidden };
        let out_w = if i == depth - 1 { output } else { hidden };
        shapes.push((in_w, out_w));
    }
    shapes
}

/// Canonical (name, shape) list for a config and head selection, in creation
/// order. Initialization draws random values in exactly this order.
pub fn parameter_shapes(cfg: &ModelConfig, heads: &HeadSpec) -> Vec<(String, Vec<usize>)> {
    let d = cfg.embed_dim;
    let mut out: Vec<(String, Vec<usize>)> = Vec::new();
    out.push(("proj.weight".into(), vec![cfg.patch_len, d]));
    out.push(("proj.bias".into(), vec![d]));
    out.push(("mask_token".into(), vec![d]));
    for l in 0..cfg.layers {
        for norm in ["norm1", "norm2"] {
            out.push((format!("enc.{l}.{norm}.gain"), vec![d]));
            out.push((format!("enc.{l}.{norm}.bias"), vec![d]));
        }
        for w in ["wq", "wk", "wv", "wo"] {
            out.push((format!("enc.{l}.attn.{w}.weight"), vec![d, d]));
            out.push((format!("enc.{l}.attn.{w}.bias"), vec![d]));
        }
        out.push((format!("enc.{l}.ffn.w1.weight"), vec![d, cfg.ff_dim]));
        out.push((format!("enc.{l}.ffn.w1.bias"), vec![cfg.ff_dim]));
        out.push((format!("enc.{l}.ffn.w2.weight"), vec![cfg.ff_dim, d]));
        out.push((format!("enc.{l}.ffn.w2.bias"), vec![d]));
    }
    out.push(("final_norm.gain".into(), vec![d]));
    out.push(("final_norm.bias".into(), vec![d]));
    if heads.reconstruction {
        for (i, (a, b)) in head_layer_shapes(d, d, cfg.patch_len, cfg.head_layers)
            .into_iter()
            .enumerate()
        {
            out.push((format!("head.recon.{i}.weight"), vec![a, b]));
            out.push((format!("head.recon.{i}.bias"), vec![b]));
        }
    }
    if let Some(h) = heads.forecast_horizon {
        let n = cfg.num_patches();
        for (i, (a, b)) in head_layer_shapes(n * d, d, h, cfg.head_layers)
            .into_iter()
            .enumerate()
        {
            out.push((format!("head.forecast.{i}.weight"), vec![a, b]));
            out.push((format!("head.forecast.{i}.bias"), vec![b]));
        }
    }
    if let Some(k) = heads.num_classes {
        for (i, (a, b)) in head_layer_shapes(d, d, k, cfg.head_layers)
            .into_iter()
            .enumerate()
        {
            out.push((format!("head.classify.{i}.weight"), vec![a, b]));
            out.push((format!("head.classify.{i}.bias"), vec![b]));
        }
    }
    out
}

/// Exact scalar count of the parameter set implied by the config and heads.
pub fn param_count(cfg: &ModelConfig, heads: &HeadSpec) -> usize {
    parameter_shapes(cfg, heads)
        .iter()
        .map(|(_, s)| s.iter().product::<usize>())
        .sum()
}

fn is_norm_gain(name: &str) -> bool {
    name.ends_with(".gain")
}

/// Deterministic initialization: Xavier-uniform weights with
/// limit √(6/(fan_in+fan_out)), zero biases, zero mask token, unit norm
/// gains. The same seed reproduces bit-identical values.
pub fn init_params(cfg: &ModelConfig, heads: &HeadSpec, seed: u64, dtype: DType) -> Result<ParameterSet> {
    cfg.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut tensors = BTreeMap::new();
    for (name, shape) in parameter_shapes(cfg, heads) {
        let tensor = if name.ends_with(".weight") {
            let fan_in = shape[0];
            let fan_out = shape[1];
            let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
            let vals: Vec<f64> = (0..fan_in * fan_out)
                .map(|_| rng.gen_range(-limit..limit))
                .collect();
            Tensor::from_f64(&shape, &vals, dtype)?
        } else if is_norm_gain(&name) {
            Tensor::full(&shape, 1.0, dtype)
        } else {
            // biases and the mask token start at zero
            Tensor::zeros(&shape, dtype)
        };
        tensors.insert(name, tensor);
    }
    Ok(ParameterSet { tensors })
}

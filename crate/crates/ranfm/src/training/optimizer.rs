//! Gradient clipping and decoupled-weight-decay Adam.

use std::collections::BTreeMap;

use num_traits::Float;

use crate::error::{Error, Result};
use crate::model::ParameterSet;
use crate::tensor::{Data, Tensor};
use crate::training::TrainConfig;

/// Named gradients, one tensor per (trainable) parameter.
pub type GradientMap = BTreeMap<String, Tensor>;

/// First/second moment estimates plus the global step counter.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    m: BTreeMap<String, Data>,
    v: BTreeMap<String, Data>,
    t: usize,
}

impl OptimizerState {
    pub fn new(params: &ParameterSet) -> Self {
        let mut m = BTreeMap::new();
        let mut v = BTreeMap::new();
        for (name, tensor) in params.iter() {
            m.insert(name.to_string(), Data::zeros(tensor.numel(), tensor.dtype()));
            v.insert(name.to_string(), Data::zeros(tensor.numel(), tensor.dtype()));
        }
        OptimizerState { m, v, t: 0 }
    }

    pub fn step_count(&self) -> usize {
        self.t
    }
}

/// Global L2 norm across all gradients, accumulated in name order.
pub fn global_grad_norm(grads: &GradientMap) -> Result<f64> {
    let mut sq = 0.0f64;
    for (name, g) in grads {
        for i in 0..g.numel() {
            let v = g.get(i);
            if !v.is_finite() {
                return Err(Error::TrainingDivergence(format!(
                    "non-finite gradient in {name}"
                )));
            }
            sq += v * v;
        }
    }
    Ok(sq.sqrt())
}

/// If the global L2 norm exceeds `clip_norm`, scale every gradient by
/// clip_norm/norm. Returns the pre-clip norm.
pub fn clip_gradients(grads: &mut GradientMap, clip_norm: f64) -> Result<f64> {
    if clip_norm <= 0.0 {
        return Err(Error::Config("clip_norm must be positive".into()));
    }
    let norm = global_grad_norm(grads)?;
    if norm > clip_norm {
        let scale = clip_norm / norm;
        for g in grads.values_mut() {
            *g = crate::ops::scale(g, scale)?;
        }
    }
    Ok(norm)
}

/// Norm gains/biases and the mask token are excluded from weight decay.
fn decays(name: &str) -> bool {
    !(name.contains("norm") || name == "mask_token")
}

#[allow(clippy::too_many_arguments)]
fn adamw_kernel<T: Float>(
    theta: &mut [T],
    g: &[T],
    m: &mut [T],
    v: &mut [T],
    lr: T,
    beta1: T,
    beta2: T,
    eps: T,
    decay: T,
    bias1: T,
    bias2: T,
) {
    let one = T::one();
    for i in 0..theta.len() {
        m[i] = beta1 * m[i] + (one - beta1) * g[i];
        v[i] = beta2 * v[i] + (one - beta2) * g[i] * g[i];
        let m_hat = m[i] / bias1;
        let v_hat = v[i] / bias2;
        theta[i] = theta[i] - lr * (m_hat / (v_hat.sqrt() + eps) + decay * theta[i]);
    }
}

/// One decoupled-weight-decay Adam step over every parameter named in
/// `grads`; parameters absent from the map are left untouched (frozen).
pub fn adamw_step(
    params: &mut ParameterSet,
    grads: &GradientMap,
    state: &mut OptimizerState,
    lr: f64,
    cfg: &TrainConfig,
) -> Result<()> {
    state.t += 1;
    let t = state.t as i32;
    let bias1 = 1.0 - cfg.beta1.powi(t);
    let bias2 = 1.0 - cfg.beta2.powi(t);
    for (name, grad) in grads {
        let param = params.get_mut(name)?;
        if param.shape() != grad.shape() {
            return Err(Error::ShapeMismatch {
                op: "adamw_step",
                lhs: param.shape().to_vec(),
                rhs: grad.shape().to_vec(),
            });
        }
        let decay = if decays(name) { cfg.weight_decay } else { 0.0 };
        let m = state
            .m
            .get_mut(name)
            .ok_or_else(|| Error::Config(format!("no optimizer state for `{name}`")))?;
        let v = state.v.get_mut(name).expect("m and v share keys");
        match (param.data_mut(), grad.data(), m, v) {
            (Data::F32(p), Data::F32(g), Data::F32(ms), Data::F32(vs)) => adamw_kernel(
                p,
                g,
                ms,
                vs,
                lr as f32,
                cfg.beta1 as f32,
                cfg.beta2 as f32,
                cfg.eps_opt as f32,
                decay as f32,
                bias1 as f32,
                bias2 as f32,
            ),
            (Data::F64(p), Data::F64(g), Data::F64(ms), Data::F64(vs)) => adamw_kernel(
                p,
                g,
                ms,
                vs,
                lr,
                cfg.beta1,
                cfg.beta2,
                cfg.eps_opt,
                decay,
                bias1,
                bias2,
            ),
            _ => return Err(Error::MixedPrecision("adamw_step")),
        }
        if !params.get(name)?.is_all_finite() {
            return Err(Error::TrainingDivergence(format!(
                "non-finite parameter after update: {name}"
            )));
        }
    }
    Ok(())
}

//! Cosine learning-rate schedule.

use crate::error::{Error, Result};

/// lr(t) = lr_min + ½(lr_max − lr_min)(1 + cos(π·t/total)).
pub fn cosine_lr(t: usize, total_steps: usize, lr_max: f64, lr_min: f64) -> Result<f64> {
    if t > total_steps {
        return Err(Error::Config(format!(
            "step {t} outside schedule 0..={total_steps}"
        )));
    }
    let phase = std::f64::consts::PI * t as f64 / total_steps as f64;
    Ok(lr_min + 0.5 * (lr_max - lr_min) * (1.0 + phase.cos()))
}

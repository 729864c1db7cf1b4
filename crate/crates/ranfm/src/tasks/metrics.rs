//! Classification and regression metrics.

use crate::error::{Error, Result};

/// Averaging mode for multi-class precision/recall/F1.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Averaging {
    /// Two classes {0, 1}; class 1 is the positive.
    Binary,
    /// Unweighted mean of one-vs-rest metrics over classes 0..num_classes;
    /// classes absent from both predictions and truth contribute zero.
    Macro { num_classes: usize },
}

fn binary_prf(tp: usize, fp: usize, fn_: usize) -> (f64, f64, f64) {
    let p = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let r = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    let f1 = if p + r == 0.0 { 0.0 } else { 2.0 * p * r / (p + r) };
    (p, r, f1)
}

/// Standard precision/recall/F1 with the zero-division-is-zero convention.
pub fn precision_recall_f1(
    pred: &[usize],
    truth: &[usize],
    averaging: Averaging,
) -> Result<(f64, f64, f64)> {
    if pred.len() != truth.len() {
        return Err(Error::data(format!(
            "length mismatch: {} predictions vs {} labels",
            pred.len(),
            truth.len()
        )));
    }
    if pred.is_empty() {
        return Err(Error::contract("precision_recall_f1", "empty label sequences"));
    }
    match averaging {
        Averaging::Binary => {
            if pred.iter().chain(truth).any(|&v| v > 1) {
                return Err(Error::data("binary averaging expects labels in {0,1}"));
            }
            let mut tp = 0;
            let mut fp = 0;
            let mut fn_ = 0;
            for (&p, &t) in pred.iter().zip(truth) {
                match (p, t) {
                    (1, 1) => tp += 1,
                    (1, 0) => fp += 1,
                    (0, 1) => fn_ += 1,
                    _ => {}
                }
            }
            Ok(binary_prf(tp, fp, fn_))
        }
        Averaging::Macro { num_classes } => {
            if num_classes < 2 {
                return Err(Error::Config("macro averaging needs >= 2 classes".into()));
            }
            if pred.iter().chain(truth).any(|&v| v >= num_classes) {
                return Err(Error::data(format!(
                    "label outside 0..{num_classes}"
                )));
            }
            let mut psum = 0.0;
            let mut rsum = 0.0;
            let mut fsum = 0.0;
            for k in 0..num_classes {
                let mut tp = 0;
                let mut fp = 0;
                let mut fn_ = 0;
                for (&p, &t) in pred.iter().zip(truth) {
                    match (p == k, t == k) {
                        (true, true) => tp += 1,
                        (true, false) => fp += 1,
                        (false, true) => fn_ += 1,
                        _ => {}
                    }
                }
                let (p, r, f1) = binary_prf(tp, fp, fn_);
                psum += p;
                rsum += r;
                fsum += f1;
            }
            let k = num_classes as f64;
            Ok((psum / k, rsum / k, fsum / k))
        }
    }
}

/// Mean squared and mean absolute error over paired values (the caller
/// supplies values in original, denormalized units).
pub fn mse_mae(y: &[f64], yhat: &[f64]) -> Result<(f64, f64)> {
    if y.len() != yhat.len() {
        return Err(Error::data(format!(
            "length mismatch: {} vs {}",
            y.len(),
            yhat.len()
        )));
    }
    if y.is_empty() {
        return Err(Error::contract("mse_mae", "empty evaluation set"));
    }
    let mut se = 0.0;
    let mut ae = 0.0;
    for (&a, &b) in y.iter().zip(yhat) {
        let d = a - b;
        se += d * d;
        ae += d.abs();
    }
    let n = y.len() as f64;
    Ok((se / n, ae / n))
}

/// MSE/MAE restricted to the masked positions only.
pub fn mse_mae_masked(y: &[f64], yhat: &[f64], mask: &[bool]) -> Result<(f64, f64)> {
    if y.len() != yhat.len() || y.len() != mask.len() {
        return Err(Error::data("length mismatch in masked mse/mae"));
    }
    let ys: Vec<f64> = y
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    let yh: Vec<f64> = yhat
        .iter()
        .zip(mask)
        .filter(|(_, &m)| m)
        .map(|(&v, _)| v)
        .collect();
    mse_mae(&ys, &yh)
}

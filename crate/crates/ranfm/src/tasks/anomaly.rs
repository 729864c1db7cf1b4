//! Reconstruction-based anomaly scoring and the point-adjusted best F1.

use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// Per-timestep anomaly scores paired with binary ground-truth labels.
#[derive(Debug, Clone)]
pub struct AnomalyScoreTrace {
    pub scores: Vec<f64>,
    pub labels: Vec<u32>,
}

impl AnomalyScoreTrace {
    pub fn new(scores: Vec<f64>, labels: Vec<u32>) -> Result<Self> {
        if scores.len() != labels.len() {
            return Err(Error::data(format!(
                "trace length mismatch: {} scores vs {} labels",
                scores.len(),
                labels.len()
            )));
        }
        if scores.iter().any(|s| !s.is_finite()) {
            return Err(Error::NonFinite("anomaly scores"));
        }
        if labels.iter().any(|&l| l > 1) {
            return Err(Error::data("anomaly labels must be 0/1"));
        }
        Ok(AnomalyScoreTrace { scores, labels })
    }
}

/// score_t = (1/C)·Σ_c (x − x̂)²_{c,t}, both sides in normalized space.
pub fn anomaly_score(x: &Tensor, xhat: &Tensor) -> Result<Vec<f64>> {
    if x.shape() != xhat.shape() || x.shape().len() != 2 {
        return Err(Error::ShapeMismatch {
            op: "anomaly_score",
            lhs: x.shape().to_vec(),
            rhs: xhat.shape().to_vec(),
        });
    }
    let (c, t) = (x.shape()[0], x.shape()[1]);
    let mut scores = vec![0.0; t];
    for ch in 0..c {
        for j in 0..t {
            let d = x.at(ch, j) - xhat.at(ch, j);
            scores[j] += d * d;
        }
    }
    for s in scores.iter_mut() {
        *s /= c as f64;
    }
    Ok(scores)
}

/// Point adjustment: every maximal contiguous run of label-1 timesteps with
/// at least one predicted positive becomes fully predicted.
pub fn point_adjust(preds: &mut [bool], labels: &[u32]) {
    let n = labels.len();
    let mut i = 0;
    while i < n {
        if labels[i] == 1 {
            let start = i;
            while i < n && labels[i] == 1 {
                i += 1;
            }
            if preds[start..i].iter().any(|&p| p) {
                for p in &mut preds[start..i] {
                    *p = true;
                }
            }
        } else {
            i += 1;
        }
    }
}

/// Binary F1 with the zero-division-is-zero convention.
pub fn f1_from_predictions(preds: &[bool], labels: &[u32]) -> f64 {
    let mut tp = 0usize;
    let mut fp = 0usize;
    let mut fn_ = 0usize;
    for (&p, &l) in preds.iter().zip(labels) {
        match (p, l) {
            (true, 1) => tp += 1,
            (true, 0) => fp += 1,
            (false, 1) => fn_ += 1,
            _ => {}
        }
    }
    let precision = if tp + fp == 0 {
        0.0
    } else {
        tp as f64 / (tp + fp) as f64
    };
    let recall = if tp + fn_ == 0 {
        0.0
    } else {
        tp as f64 / (tp + fn_) as f64
    };
    if precision + recall == 0.0 {
        0.0
    } else {
        2.0 * precision * recall / (precision + recall)
    }
}

/// Best point-adjusted F1 over every distinct score threshold (predict
/// score ≥ τ), returning (best F1, smallest τ achieving it).
pub fn adjusted_best_f1(trace: &AnomalyScoreTrace) -> Result<(f64, f64)> {
    if !trace.labels.contains(&1) {
        return Err(Error::contract(
            "adjusted_best_f1",
            "no positive labels: recall undefined",
        ));
    }
    let mut thresholds = trace.scores.clone();
    thresholds.sort_by(|a, b| a.partial_cmp(b).unwrap());
    thresholds.dedup();

    let mut best_f1 = -1.0;
    let mut best_tau = thresholds[0];
    for &tau in &thresholds {
        let mut preds: Vec<bool> = trace.scores.iter().map(|&s| s >= tau).collect();
        point_adjust(&mut preds, &trace.labels);
        let f1 = f1_from_predictions(&preds, &trace.labels);
        if f1 > best_f1 {
            best_f1 = f1;
            best_tau = tau;
        }
    }
    Ok((best_f1, best_tau))
}

//! Task evaluation: route a dataset through the right head and compute the
//! task's metrics.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapile::{CuratedDataset, Labels, Split};
use crate::error::{Error, Result};
use crate::model::{revin_denormalize, revin_normalize, Model};
use crate::tasks::anomaly::{adjusted_best_f1, anomaly_score, AnomalyScoreTrace};
use crate::tasks::imputation::impute;
use crate::tasks::metrics::{mse_mae, precision_recall_f1, Averaging};
use crate::tensor::Tensor;
use crate::training::pretrain::REVIN_EPS;
use crate::training::windows::{extract_window, window_offsets};
use crate::training::{FinetuneTask, Regime};

/// Metric-name → value map emitted by every evaluation path.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct EvalReport {
    pub task: String,
    pub dataset: String,
    pub regime: String,
    pub metrics: BTreeMap<String, f64>,
}

impl EvalReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in &self.metrics {
            if !v.is_finite() {
                return Err(Error::NonFinite("eval metric"));
            }
            if (name.contains("f1") || name.contains("precision") || name.contains("recall"))
                && !(0.0..=1.0).contains(v)
            {
                return Err(Error::data(format!("{name}={v} outside [0,1]")));
            }
        }
        Ok(())
    }
}

/// Evaluation knobs with standard horizon and mask-ratio defaults.
#[derive(Debug, Clone)]
pub struct EvalOptions {
    /// Forecast horizons to report (clipped to the model's head horizon).
    pub horizons: Vec<usize>,
    /// Imputation mask ratios to report.
    pub mask_ratios: Vec<f64>,
    /// Segment length used when sampling evaluation missing-masks.
    pub gap_len: usize,
    pub seed: u64,
}

impl Default for EvalOptions {
    fn default() -> Self {
        EvalOptions {
            horizons: vec![32, 64, 128, 208],
            mask_ratios: vec![0.10, 0.30, 0.50],
            gap_len: 8,
            seed: 0,
        }
    }
}

fn regime_str(regime: Regime) -> &'static str {
    match regime {
        Regime::Pretrain => "pretrain",
        Regime::FullFinetune => "ff",
        Regime::LinearProbe => "lp",
        Regime::ZeroShot => "zero_shot",
    }
}

fn task_str(task: FinetuneTask) -> &'static str {
    match task {
        FinetuneTask::Anomaly => "anomaly",
        FinetuneTask::Classify => "classify",
        FinetuneTask::Forecast => "forecast",
        FinetuneTask::Impute => "impute",
    }
}

/// Random disjoint missing segments of `gap_len` samples per channel until
/// `ratio` of all samples is missing. Deterministic given the seed.
pub fn segment_missing_mask(
    channels: usize,
    len: usize,
    ratio: f64,
    gap_len: usize,
    seed: u64,
) -> Vec<bool> {
    let mut mask = vec![false; channels * len];
    let target = ((ratio * (channels * len) as f64).round() as usize).min(channels * len);
    let mut missing = 0usize;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let gap_cap = gap_len.clamp(1, len.saturating_sub(1).max(1));
    let mut attempts = 0;
    while missing < target && attempts < 10_000 {
        attempts += 1;
        let gap = gap_cap.min(target - missing).max(1);
        let ch = rng.gen_range(0..channels);
        let start = rng.gen_range(0..len - gap + 1);
        if mask[ch * len + start..ch * len + start + gap].iter().any(|&m| m) {
            continue;
        }
        // keep at least one observed sample per channel
        let ch_missing: usize = mask[ch * len..(ch + 1) * len].iter().filter(|&&m| m).count();
        if ch_missing + gap >= len {
            continue;
        }
        for m in &mut mask[ch * len + start..ch * len + start + gap] {
            *m = true;
        }
        missing += gap;
    }
    mask
}

/// Evaluate `model` on a held-out dataset for one task, returning the
/// task's metric map.
pub fn evaluate(
    model: &Model,
    dataset: &CuratedDataset,
    task: FinetuneTask,
    regime: Regime,
    opts: &EvalOptions,
) -> Result<EvalReport> {
    if dataset.split != Split::Test {
        return Err(Error::contract(
            "evaluate",
            format!("dataset {} is not a test split", dataset.name),
        ));
    }
    if regime == Regime::ZeroShot
        && matches!(task, FinetuneTask::Classify | FinetuneTask::Forecast)
    {
        return Err(Error::UnsupportedRegime(format!(
            "zero-shot is unsupported for {}",
            task_str(task)
        )));
    }
    let metrics = match task {
        FinetuneTask::Anomaly => eval_anomaly(model, dataset)?,
        FinetuneTask::Classify => eval_classify(model, dataset)?,
        FinetuneTask::Forecast => eval_forecast(model, dataset, opts)?,
        FinetuneTask::Impute => eval_impute(model, dataset, opts)?,
    };
    let report = EvalReport {
        task: task_str(task).to_string(),
        dataset: dataset.name.clone(),
        regime: regime_str(regime).to_string(),
        metrics,
    };
    report.validate()?;
    Ok(report)
}

/// Tile the trace with non-overlapping windows, reconstruct each without
/// masking, and score per timestep in normalized space.
pub fn score_trace(model: &Model, dataset: &CuratedDataset) -> Result<(Vec<f64>, usize)> {
    let window = model.cfg.window_len;
    let covered_per_window = model.cfg.num_patches() * model.cfg.patch_len;
    let offsets = window_offsets(dataset.len(), window, window)?;
    let mut scores = Vec::new();
    for off in offsets {
        let win = extract_window(&dataset.channels, off, window)?;
        let (xn, _) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
        let recon = model.reconstruct_window(&xn)?;
        // compare over the patch-covered prefix
        let c = xn.shape()[0];
        let mut x_cov = Vec::with_capacity(c * covered_per_window);
        for ch in 0..c {
            for j in 0..covered_per_window {
                x_cov.push(xn.at(ch, j));
            }
        }
        let x_cov = Tensor::from_f64(&[c, covered_per_window], &x_cov, recon.dtype())?;
        scores.extend(anomaly_score(&x_cov, &recon)?);
        // timesteps between the covered prefix and the window end score 0
        scores.extend(std::iter::repeat(0.0).take(window - covered_per_window));
    }
    let covered = scores.len();
    Ok((scores, covered))
}

fn eval_anomaly(model: &Model, dataset: &CuratedDataset) -> Result<BTreeMap<String, f64>> {
    let labels = match &dataset.labels {
        Some(Labels::PerTimestep(l)) => l.clone(),
        _ => {
            return Err(Error::data(format!(
                "anomaly evaluation needs per-timestep labels on {}",
                dataset.name
            )))
        }
    };
    let (scores, covered) = score_trace(model, dataset)?;
    let trace = AnomalyScoreTrace::new(scores, labels[..covered].to_vec())?;
    let (f1, tau) = adjusted_best_f1(&trace)?;
    let mut m = BTreeMap::new();
    m.insert("adjusted_best_f1".to_string(), f1);
    m.insert("best_threshold".to_string(), tau);
    Ok(m)
}

fn eval_classify(model: &Model, dataset: &CuratedDataset) -> Result<BTreeMap<String, f64>> {
    let k = model
        .heads
        .num_classes
        .ok_or_else(|| Error::Config("model has no classification head".into()))?;
    let window = model.cfg.window_len;
    let offsets = window_offsets(dataset.len(), window, window)?;
    let mut preds = Vec::new();
    let mut truths = Vec::new();
    for off in offsets {
        let win = extract_window(&dataset.channels, off, window)?;
        let (xn, _) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
        let logits = model.classify_window(&xn)?;
        let mut best = 0;
        for j in 1..k {
            if logits.get(j) > logits.get(best) {
                best = j;
            }
        }
        preds.push(best);
        truths.push(window_truth(dataset, off, window)?);
    }
    let (p, r, f1) = precision_recall_f1(&preds, &truths, Averaging::Macro { num_classes: k })?;
    let mut m = BTreeMap::new();
    m.insert("precision".to_string(), p);
    m.insert("recall".to_string(), r);
    m.insert("f1".to_string(), f1);
    Ok(m)
}

fn window_truth(d: &CuratedDataset, offset: usize, window: usize) -> Result<usize> {
    match &d.labels {
        Some(Labels::PerSeries(v)) => Ok(*v as usize),
        Some(Labels::PerTimestep(l)) => {
            let mut counts = BTreeMap::new();
            for &v in &l[offset..offset + window] {
                *counts.entry(v).or_insert(0usize) += 1;
            }
            Ok(counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(v, _)| v as usize)
                .unwrap())
        }
        None => Err(Error::data(format!("dataset {} has no labels", d.name))),
    }
}

fn eval_forecast(
    model: &Model,
    dataset: &CuratedDataset,
    opts: &EvalOptions,
) -> Result<BTreeMap<String, f64>> {
    let head_h = model
        .heads
        .forecast_horizon
        .ok_or_else(|| Error::Config("model has no forecast head".into()))?;
    let window = model.cfg.window_len;
    if dataset.len() < window + head_h {
        return Err(Error::data(format!(
            "dataset {} too short for window {window} + horizon {head_h}",
            dataset.name
        )));
    }
    let offsets = window_offsets(dataset.len() - head_h, window, window)?;
    let horizons: Vec<usize> = opts
        .horizons
        .iter()
        .copied()
        .filter(|&h| h >= 1 && h <= head_h)
        .collect();
    if horizons.is_empty() {
        return Err(Error::Config(format!(
            "no requested horizon fits the head horizon {head_h}"
        )));
    }
    let c = dataset.num_channels();
    let mut preds: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
    let mut truths: Vec<Vec<f64>> = vec![Vec::new(); horizons.len()];
    for off in offsets {
        let win = extract_window(&dataset.channels, off, window)?;
        let (xn, stats) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
        let pred_norm = model.forecast_window(&xn)?;
        let pred = revin_denormalize(&pred_norm, &stats)?;
        let future = extract_window(&dataset.channels, off + window, head_h)?;
        for (hi, &h) in horizons.iter().enumerate() {
            for ch in 0..c {
                for j in 0..h {
                    preds[hi].push(pred.at(ch, j));
                    truths[hi].push(future.at(ch, j));
                }
            }
        }
    }
    let mut m = BTreeMap::new();
    for (hi, &h) in horizons.iter().enumerate() {
        let (mse, mae) = mse_mae(&truths[hi], &preds[hi])?;
        m.insert(format!("mse_h{h}"), mse);
        m.insert(format!("mae_h{h}"), mae);
    }
    Ok(m)
}

fn eval_impute(
    model: &Model,
    dataset: &CuratedDataset,
    opts: &EvalOptions,
) -> Result<BTreeMap<String, f64>> {
    let window = model.cfg.window_len;
    let offsets = window_offsets(dataset.len(), window, window)?;
    let c = dataset.num_channels();
    let mut m = BTreeMap::new();
    for &ratio in &opts.mask_ratios {
        let mut y = Vec::new();
        let mut yhat = Vec::new();
        for (wi, off) in offsets.iter().enumerate() {
            let win = extract_window(&dataset.channels, *off, window)?;
            let mask = segment_missing_mask(
                c,
                window,
                ratio,
                opts.gap_len,
                opts.seed ^ ((ratio * 1000.0) as u64) ^ (wi as u64) << 20,
            );
            let filled = impute(&win, &mask, model)?;
            for i in 0..c * window {
                if mask[i] {
                    y.push(win.get(i));
                    yhat.push(filled.get(i));
                }
            }
        }
        let (mse, mae) = mse_mae(&y, &yhat)?;
        let pct = (ratio * 100.0).round() as usize;
        m.insert(format!("mse_r{pct}"), mse);
        m.insert(format!("mae_r{pct}"), mae);
    }
    Ok(m)
}

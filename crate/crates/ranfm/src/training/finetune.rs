//! Task adaptation: end-to-end fine-tuning, linear probing with a frozen
//! encoder, and zero-shot (no updates).

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datapile::{CuratedDataset, Labels};
use crate::error::{Error, Result};
use crate::model::Model;
use crate::tensor::Tensor;
use crate::training::masking::select_mask_indices;
use crate::training::optimizer::{adamw_step, clip_gradients, OptimizerState};
use crate::training::pretrain::{batch_step, instance_seed, Instance, InstanceTarget, LossPoint};
use crate::training::schedule::cosine_lr;
use crate::training::windows::{dataset_weights, extract_window, stride_for_size, window_offsets};
use crate::training::{Regime, TrainConfig};

/// Downstream task being adapted.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FinetuneTask {
    Anomaly,
    Classify,
    Forecast,
    Impute,
}

impl std::str::FromStr for FinetuneTask {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "anomaly" => Ok(FinetuneTask::Anomaly),
            "classify" | "classification" => Ok(FinetuneTask::Classify),
            "forecast" | "forecasting" => Ok(FinetuneTask::Forecast),
            "impute" | "imputation" => Ok(FinetuneTask::Impute),
            other => Err(Error::Config(format!("unknown task `{other}`"))),
        }
    }
}

impl FinetuneTask {
    /// Head parameter prefix trained under linear probing.
    fn head_prefix(self) -> &'static str {
        match self {
            FinetuneTask::Anomaly | FinetuneTask::Impute => "head.recon.",
            FinetuneTask::Classify => "head.classify.",
            FinetuneTask::Forecast => "head.forecast.",
        }
    }

    fn requires_head(self, model: &Model) -> Result<()> {
        let ok = match self {
            FinetuneTask::Anomaly | FinetuneTask::Impute => model.heads.reconstruction,
            FinetuneTask::Classify => model.heads.num_classes.is_some(),
            FinetuneTask::Forecast => model.heads.forecast_horizon.is_some(),
        };
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!(
                "model lacks the head required for {self:?}"
            )))
        }
    }
}

#[derive(Debug, Clone)]
pub struct FinetuneOutcome {
    pub curve: Vec<LossPoint>,
}

/// Majority label over a window span (smaller class id wins ties).
fn window_label(d: &CuratedDataset, offset: usize, window: usize) -> Result<usize> {
    match &d.labels {
        Some(Labels::PerSeries(v)) => Ok(*v as usize),
        Some(Labels::PerTimestep(l)) => {
            let mut counts = std::collections::BTreeMap::new();
            for &v in &l[offset..offset + window] {
                *counts.entry(v).or_insert(0usize) += 1;
            }
            counts
                .into_iter()
                .max_by(|a, b| a.1.cmp(&b.1).then(b.0.cmp(&a.0)))
                .map(|(v, _)| v as usize)
                .ok_or_else(|| Error::data("empty label window"))
        }
        None => Err(Error::data(format!(
            "dataset {} carries no labels",
            d.name
        ))),
    }
}

/// Extract the raw C×H continuation right after a window.
fn future_slice(d: &CuratedDataset, offset: usize, window: usize, horizon: usize) -> Result<Tensor> {
    extract_window(&d.channels, offset + window, horizon)
}

/// Adapt a model to one task over a collection of curated datasets.
///
/// FF trains everything; LP updates only the task head (the encoder,
/// projection, mask token, and positional machinery never change);
/// zero-shot performs no updates and is valid only for reconstruction-based
/// tasks (anomaly detection and imputation).
pub fn finetune(
    model: &mut Model,
    task: FinetuneTask,
    datasets: &[CuratedDataset],
    regime: Regime,
    cfg: &TrainConfig,
) -> Result<FinetuneOutcome> {
    cfg.validate()?;
    task.requires_head(model)?;
    match regime {
        Regime::ZeroShot => {
            if !matches!(task, FinetuneTask::Anomaly | FinetuneTask::Impute) {
                return Err(Error::UnsupportedRegime(format!(
                    "zero-shot supports only anomaly detection and imputation, not {task:?}"
                )));
            }
            return Ok(FinetuneOutcome { curve: Vec::new() });
        }
        Regime::Pretrain => {
            return Err(Error::UnsupportedRegime(
                "use pretrain() for the pretraining regime".into(),
            ))
        }
        Regime::FullFinetune | Regime::LinearProbe => {}
    }
    if datasets.is_empty() {
        return Err(Error::contract("finetune", "no datasets"));
    }

    let window = model.cfg.window_len;
    let horizon = model.heads.forecast_horizon.unwrap_or(0);
    let reserve = if task == FinetuneTask::Forecast { horizon } else { 0 };

    // usable datasets and their strided offsets
    let mut usable: Vec<&CuratedDataset> = Vec::new();
    let mut offsets: Vec<Vec<usize>> = Vec::new();
    let mut sizes = Vec::new();
    for d in datasets {
        if d.len() < window + reserve {
            continue;
        }
        let stride = stride_for_size(d.num_samples());
        offsets.push(window_offsets(d.len() - reserve, window, stride)?);
        usable.push(d);
        sizes.push(d.num_samples());
    }
    if usable.is_empty() {
        return Err(Error::data(format!(
            "no dataset long enough for window {window} (+{reserve} horizon)"
        )));
    }
    let weights = dataset_weights(&sizes)?;

    let n_tokens = |c: usize| c * model.cfg.num_patches();
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(&model.params);
    let mut curve = Vec::with_capacity(cfg.total_steps);

    for step in 0..cfg.total_steps {
        let di = {
            let u: f64 = rng.gen();
            let mut acc = 0.0;
            let mut pick = weights.len() - 1;
            for (i, w) in weights.iter().enumerate() {
                acc += w;
                if u < acc {
                    pick = i;
                    break;
                }
            }
            pick
        };
        let d = usable[di];
        let offs = &offsets[di];
        let mut instances = Vec::with_capacity(cfg.batch_size);
        for b in 0..cfg.batch_size {
            let offset = offs[rng.gen_range(0..offs.len())];
            let win = extract_window(&d.channels, offset, window)?;
            let (mask, target) = match task {
                FinetuneTask::Anomaly | FinetuneTask::Impute => {
                    let mut mask_rng =
                        ChaCha8Rng::seed_from_u64(instance_seed(cfg.seed, step, b));
                    let mask = select_mask_indices(
                        n_tokens(d.num_channels()),
                        cfg.mask_ratio,
                        &mut mask_rng,
                    )?;
                    (mask, InstanceTarget::MaskedRecon)
                }
                FinetuneTask::Classify => {
                    let label = window_label(d, offset, window)?;
                    let k = model.heads.num_classes.unwrap();
                    if label >= k {
                        return Err(Error::data(format!(
                            "label {label} outside 0..{k} in dataset {}",
                            d.name
                        )));
                    }
                    (Vec::new(), InstanceTarget::Class(label))
                }
                FinetuneTask::Forecast => {
                    let fut = future_slice(d, offset, window, horizon)?;
                    (Vec::new(), InstanceTarget::Horizon(fut))
                }
            };
            instances.push(Instance {
                window: win,
                mask,
                target,
            });
        }

        let (loss, mut grads) = batch_step(model, &instances)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDivergence(format!(
                "non-finite loss at step {step}"
            )));
        }
        if regime == Regime::LinearProbe {
            let prefix = task.head_prefix();
            grads.retain(|name, _| name.starts_with(prefix));
        }
        clip_gradients(&mut grads, cfg.clip_norm)?;
        let lr = cosine_lr(step, cfg.total_steps, cfg.lr_max, cfg.lr_min)?;
        adamw_step(&mut model.params, &grads, &mut state, lr, cfg)?;
        curve.push(LossPoint {
            step: step + 1,
            lr,
            loss,
        });
    }
    Ok(FinetuneOutcome { curve })
}

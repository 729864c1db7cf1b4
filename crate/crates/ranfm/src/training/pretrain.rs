//! The masked-pretraining loop: size-aware dataset sampling, strided window
//! batches, per-instance masking, reconstruction loss, clipped AdamW updates
//! on a cosine schedule.
//!
//! Batch instances run concurrently (each owns its graph); gradients are
//! reduced in instance order, so runs are bit-reproducible for a fixed seed
//! regardless of thread count.

use std::io::Write;
use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::datapile::CuratedDataset;
use crate::error::{Error, Result};
use crate::graph::Graph;
use crate::model::{
    bind_params, build_classify_head, build_embedding, build_encoder, build_forecast_head,
    build_recon_head, revin_normalize, Model,
};
use crate::parallel::map_indexed;
use crate::tensor::Tensor;
use crate::training::masking::{masked_sample_positions, select_mask_indices};
use crate::training::optimizer::{adamw_step, clip_gradients, GradientMap, OptimizerState};
use crate::training::schedule::cosine_lr;
use crate::training::windows::{dataset_weights, extract_window, stride_for_size, window_offsets};
use crate::training::TrainConfig;

/// Epsilon for window normalization during training and inference.
pub const REVIN_EPS: f64 = 1e-5;

/// One row of the loss curve.
#[derive(Debug, Clone, PartialEq)]
pub struct LossPoint {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Debug, Clone)]
pub struct PretrainOutcome {
    pub curve: Vec<LossPoint>,
}

/// Loss-curve CSV: header `step,lr,loss`, one row per step.
pub fn write_loss_csv(curve: &[LossPoint], path: &Path) -> Result<()> {
    let mut out = String::from("step,lr,loss\n");
    for p in curve {
        out.push_str(&format!("{},{},{}\n", p.step, p.lr, p.loss));
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

fn splitmix64(mut x: u64) -> u64 {
    x = x.wrapping_add(0x9e3779b97f4a7c15);
    x = (x ^ (x >> 30)).wrapping_mul(0xbf58476d1ce4e5b9);
    x = (x ^ (x >> 27)).wrapping_mul(0x94d049bb133111eb);
    x ^ (x >> 31)
}

/// Independent per-instance rng stream derived from (seed, step, instance).
pub(crate) fn instance_seed(seed: u64, step: usize, instance: usize) -> u64 {
    splitmix64(seed ^ splitmix64(step as u64 ^ splitmix64(instance as u64 ^ 0xa5a5_5a5a)))
}

/// What one training instance optimizes.
#[derive(Debug, Clone)]
pub(crate) enum InstanceTarget {
    /// Reconstruct the instance's own window; loss over masked samples.
    MaskedRecon,
    /// Cross-entropy against a class id.
    Class(usize),
    /// MSE against the window's raw continuation (normalized with the
    /// window's stats at loss time).
    Horizon(Tensor),
}

#[derive(Debug, Clone)]
pub(crate) struct Instance {
    /// Raw (denormalized) C×T window, data-side f64.
    pub window: Tensor,
    /// Masked token indices; required for `MaskedRecon`.
    pub mask: Vec<usize>,
    pub target: InstanceTarget,
}

/// Keep the first `width` columns of each channel row.
fn truncate_cols(x: &Tensor, width: usize) -> Result<Tensor> {
    let (c, t) = (x.shape()[0], x.shape()[1]);
    if width == t {
        return Ok(x.clone());
    }
    let mut flat = Vec::with_capacity(c * width);
    for ch in 0..c {
        for j in 0..width {
            flat.push(x.at(ch, j));
        }
    }
    Tensor::from_f64(&[c, width], &flat, x.dtype())
}

/// Forward + backward for one instance; returns (loss, per-parameter grads).
pub(crate) fn run_instance(model: &Model, inst: &Instance) -> Result<(f64, GradientMap)> {
    let dtype = model.dtype();
    let (xn, stats) = revin_normalize(&inst.window.cast(dtype), REVIN_EPS)?;
    let mut g = Graph::new();
    let nodes = bind_params(&mut g, &model.params);
    let mask_opt = if inst.mask.is_empty() {
        None
    } else {
        Some(inst.mask.as_slice())
    };
    let (tokens, layout) = build_embedding(&mut g, &model.cfg, &nodes, &xn, mask_opt)?;
    let z = build_encoder(&mut g, &model.cfg, &nodes, tokens)?;

    let loss_node = match &inst.target {
        InstanceTarget::MaskedRecon => {
            let recon = build_recon_head(&mut g, &model.cfg, &nodes, z, layout)?;
            let covered = layout.num_patches * model.cfg.patch_len;
            let target = truncate_cols(&xn, covered)?;
            let positions =
                masked_sample_positions(&inst.mask, layout, model.cfg.patch_len);
            g.masked_mse(recon, target, &positions)?
        }
        InstanceTarget::Class(k) => {
            let logits = build_classify_head(&mut g, &model.cfg, &nodes, z)?;
            g.softmax_xent(logits, *k)?
        }
        InstanceTarget::Horizon(raw_future) => {
            let pred = build_forecast_head(&mut g, &model.cfg, &nodes, z, layout)?;
            // normalize the continuation with the window's own stats
            let c = raw_future.shape()[0];
            let h = raw_future.shape()[1];
            let mut norm = Vec::with_capacity(c * h);
            for ch in 0..c {
                for j in 0..h {
                    norm.push((raw_future.at(ch, j) - stats.mean[ch]) / stats.std[ch]);
                }
            }
            let target = Tensor::from_f64(&[c, h], &norm, dtype)?;
            let all: Vec<usize> = (0..c * h).collect();
            g.masked_mse(pred, target, &all)?
        }
    };
    let loss = g.value(loss_node).get(0);
    g.backward(loss_node)?;

    let mut grads = GradientMap::new();
    for (name, id) in nodes.iter() {
        let grad = g.grad(id).ok_or_else(|| {
            Error::Contract {
                op: "run_instance",
                detail: format!("missing gradient for {name}"),
            }
        })?;
        grads.insert(name.to_string(), grad);
    }
    Ok((loss, grads))
}

/// Run a batch of instances (concurrently), mean-reduce losses and grads in
/// instance order.
pub(crate) fn batch_step(model: &Model, instances: &[Instance]) -> Result<(f64, GradientMap)> {
    let results: Vec<Result<(f64, GradientMap)>> =
        map_indexed(instances.len(), true, |i| run_instance(model, &instances[i]));
    let inv = 1.0 / instances.len() as f64;
    let mut loss_sum = 0.0;
    let mut acc: Option<GradientMap> = None;
    for r in results {
        let (loss, grads) = r?;
        loss_sum += loss;
        acc = Some(match acc {
            None => grads,
            Some(mut sum) => {
                for (name, g) in grads {
                    let slot = sum.get_mut(&name).expect("uniform grad keys");
                    *slot = crate::ops::add(slot, &g)?;
                }
                sum
            }
        });
    }
    let mut grads = acc.ok_or_else(|| Error::contract("batch_step", "empty batch"))?;
    for g in grads.values_mut() {
        *g = crate::ops::scale(g, inv)?;
    }
    Ok((loss_sum * inv, grads))
}

/// One masked-reconstruction forward/backward over a single raw window:
/// the pretraining loss building block, exposed for verification harnesses.
pub fn masked_step(
    model: &Model,
    window: &Tensor,
    mask: &[usize],
) -> Result<(f64, GradientMap)> {
    run_instance(
        model,
        &Instance {
            window: window.clone(),
            mask: mask.to_vec(),
            target: InstanceTarget::MaskedRecon,
        },
    )
}

/// Per-dataset sampling state: offsets at the size-appropriate stride.
struct CorpusView<'a> {
    datasets: Vec<&'a CuratedDataset>,
    offsets: Vec<Vec<usize>>,
    weights: Vec<f64>,
}

fn corpus_view<'a>(
    corpus: &'a [CuratedDataset],
    window: usize,
    reserve_tail: usize,
) -> Result<CorpusView<'a>> {
    let mut datasets = Vec::new();
    let mut offsets = Vec::new();
    let mut sizes = Vec::new();
    for d in corpus {
        if d.len() < window + reserve_tail {
            continue;
        }
        let stride = stride_for_size(d.num_samples());
        let offs = window_offsets(d.len() - reserve_tail, window, stride)?;
        datasets.push(d);
        offsets.push(offs);
        sizes.push(d.num_samples());
    }
    if datasets.is_empty() {
        return Err(Error::data(format!(
            "no dataset long enough for window {window}"
        )));
    }
    let weights = dataset_weights(&sizes)?;
    Ok(CorpusView {
        datasets,
        offsets,
        weights,
    })
}

fn weighted_pick(weights: &[f64], rng: &mut impl Rng) -> usize {
    let u: f64 = rng.gen();
    let mut acc = 0.0;
    for (i, w) in weights.iter().enumerate() {
        acc += w;
        if u < acc {
            return i;
        }
    }
    weights.len() - 1
}

/// Masked self-supervised pretraining over a corpus of curated datasets.
/// Emits one loss point per step; fully deterministic given `cfg.seed`.
pub fn pretrain(
    corpus: &[CuratedDataset],
    model: &mut Model,
    cfg: &TrainConfig,
) -> Result<PretrainOutcome> {
    cfg.validate()?;
    if corpus.is_empty() {
        return Err(Error::contract("pretrain", "empty corpus"));
    }
    if !model.heads.reconstruction {
        return Err(Error::Config(
            "pretraining requires the reconstruction head".into(),
        ));
    }
    let window = model.cfg.window_len;
    let view = corpus_view(corpus, window, 0)?;
    let n_tokens = |c: usize| c * model.cfg.num_patches();

    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut state = OptimizerState::new(&model.params);
    let mut curve = Vec::with_capacity(cfg.total_steps);

    for step in 0..cfg.total_steps {
        let di = weighted_pick(&view.weights, &mut rng);
        let dataset = view.datasets[di];
        let offs = &view.offsets[di];
        let mut instances = Vec::with_capacity(cfg.batch_size);
        for b in 0..cfg.batch_size {
            let offset = offs[rng.gen_range(0..offs.len())];
            let win = extract_window(&dataset.channels, offset, window)?;
            let mut mask_rng =
                ChaCha8Rng::seed_from_u64(instance_seed(cfg.seed, step, b));
            let mask = select_mask_indices(
                n_tokens(dataset.num_channels()),
                cfg.mask_ratio,
                &mut mask_rng,
            )?;
            instances.push(Instance {
                window: win,
                mask,
                target: InstanceTarget::MaskedRecon,
            });
        }
        let (loss, mut grads) = batch_step(model, &instances)?;
        if !loss.is_finite() {
            return Err(Error::TrainingDivergence(format!(
                "non-finite loss at step {step}"
            )));
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
    Ok(PretrainOutcome { curve })
}

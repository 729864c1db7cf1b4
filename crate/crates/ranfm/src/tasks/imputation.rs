//! Model-based and classical imputation of missing samples.

use crate::error::{Error, Result};
use crate::model::{revin_denormalize, revin_normalize, Model};
use crate::tensor::Tensor;
use crate::training::pretrain::REVIN_EPS;

/// Classical baseline families.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BaselineKind {
    ForwardFill,
    Mean,
    Nearest,
    Linear,
    RollingMean,
}

impl std::str::FromStr for BaselineKind {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward_fill" => Ok(BaselineKind::ForwardFill),
            "mean" => Ok(BaselineKind::Mean),
            "nearest" => Ok(BaselineKind::Nearest),
            "linear" => Ok(BaselineKind::Linear),
            "rolling_mean" => Ok(BaselineKind::RollingMean),
            other => Err(Error::Config(format!("unknown baseline kind `{other}`"))),
        }
    }
}

/// Centered window width for the rolling-mean baseline.
const ROLLING_WINDOW: usize = 5;

fn check_mask(x: &Tensor, missing: &[bool]) -> Result<(usize, usize)> {
    if x.shape().len() != 2 {
        return Err(Error::InvalidDimension {
            op: "impute",
            detail: format!("expected C×T matrix, got {:?}", x.shape()),
        });
    }
    if missing.len() != x.numel() {
        return Err(Error::data(format!(
            "missing mask has {} entries for {} samples",
            missing.len(),
            x.numel()
        )));
    }
    Ok((x.shape()[0], x.shape()[1]))
}

fn observed_indices(missing: &[bool]) -> Vec<usize> {
    (0..missing.len()).filter(|&i| !missing[i]).collect()
}

fn fill_channel(values: &[f64], missing: &[bool], kind: BaselineKind) -> Result<Vec<f64>> {
    let n = values.len();
    let observed = observed_indices(missing);
    if observed.is_empty() {
        return Err(Error::data("channel with zero observed values"));
    }
    let chan_mean =
        observed.iter().map(|&i| values[i]).sum::<f64>() / observed.len() as f64;
    let mut out = values.to_vec();
    for i in 0..n {
        if !missing[i] {
            continue;
        }
        let next = observed.partition_point(|&o| o < i);
        let right = observed.get(next).copied();
        let left = if next > 0 { Some(observed[next - 1]) } else { None };
        out[i] = match kind {
            BaselineKind::ForwardFill => match left {
                Some(l) => values[l],
                // leading gap backfilled from the first observed value
                None => values[right.unwrap()],
            },
            BaselineKind::Mean => chan_mean,
            BaselineKind::Nearest => match (left, right) {
                (Some(l), Some(r)) => {
                    // earlier observation wins ties
                    if i - l <= r - i {
                        values[l]
                    } else {
                        values[r]
                    }
                }
                (Some(l), None) => values[l],
                (None, Some(r)) => values[r],
                (None, None) => unreachable!(),
            },
            BaselineKind::Linear => match (left, right) {
                (Some(l), Some(r)) => {
                    let w = (i - l) as f64 / (r - l) as f64;
                    values[l] * (1.0 - w) + values[r] * w
                }
                // edges held at the nearest observed value
                (Some(l), None) => values[l],
                (None, Some(r)) => values[r],
                (None, None) => unreachable!(),
            },
            BaselineKind::RollingMean => {
                let half = ROLLING_WINDOW / 2;
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(n - 1);
                let mut acc = 0.0;
                let mut cnt = 0usize;
                for j in lo..=hi {
                    if !missing[j] {
                        acc += values[j];
                        cnt += 1;
                    }
                }
                if cnt == 0 {
                    chan_mean
                } else {
                    acc / cnt as f64
                }
            }
        };
    }
    Ok(out)
}

/// Fill missing samples with a classical baseline; observed samples pass
/// through bit-exactly.
pub fn baseline_impute(x: &Tensor, missing: &[bool], kind: BaselineKind) -> Result<Tensor> {
    let (c, t) = check_mask(x, missing)?;
    let mut out = x.clone();
    out.clear_grad();
    for ch in 0..c {
        let vals: Vec<f64> = (0..t).map(|j| x.at(ch, j)).collect();
        let miss = &missing[ch * t..(ch + 1) * t];
        let filled = fill_channel(&vals, miss, kind)?;
        for j in 0..t {
            if miss[j] {
                out.set(ch * t + j, filled[j]);
            }
        }
    }
    Ok(out)
}

/// Model-based imputation: missing samples are linearly pre-filled for
/// normalization statistics only, every patch containing a missing sample is
/// mask-token-replaced, and the denormalized reconstruction overwrites
/// exactly the missing positions. Samples beyond the patch-covered prefix
/// keep their linear pre-fill.
pub fn impute(x: &Tensor, missing: &[bool], model: &Model) -> Result<Tensor> {
    let (c, t) = check_mask(x, missing)?;
    if missing.iter().all(|&m| m) {
        return Err(Error::contract("impute", "every sample is missing"));
    }
    for ch in 0..c {
        if missing[ch * t..(ch + 1) * t].iter().all(|&m| m) {
            return Err(Error::data(format!(
                "channel {ch} entirely missing: unimputable"
            )));
        }
    }
    if missing.iter().all(|&m| !m) {
        return Ok(x.clone());
    }

    let prefilled = baseline_impute(x, missing, BaselineKind::Linear)?;

    // tokens whose patch covers at least one missing sample
    let p = model.cfg.patch_len;
    let n = t / p;
    if n == 0 {
        return Err(Error::data(format!(
            "series length {t} shorter than patch length {p}"
        )));
    }
    let mut mask_tokens = Vec::new();
    for ch in 0..c {
        for i in 0..n {
            let covered = &missing[ch * t + i * p..ch * t + (i + 1) * p];
            if covered.iter().any(|&m| m) {
                mask_tokens.push(ch * n + i);
            }
        }
    }

    let (xn, stats) = revin_normalize(&prefilled.cast(model.dtype()), REVIN_EPS)?;
    let recon_norm = model.reconstruct_with_mask(&xn, &mask_tokens)?;
    let recon = revin_denormalize(&recon_norm, &stats)?;

    let covered_width = n * p;
    let mut out = prefilled;
    for ch in 0..c {
        for j in 0..t {
            if missing[ch * t + j] && j < covered_width {
                out.set(ch * t + j, recon.at(ch, j));
            }
        }
    }
    // observed samples must be byte-exact copies of the input
    for i in 0..c * t {
        if !missing[i] {
            out.set(i, x.get(i));
        }
    }
    Ok(out)
}

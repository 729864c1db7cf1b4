//! Train/test split construction.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::datapile::types::{CuratedDataset, Labels, Split};
use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SplitStrategy {
    /// First ⌊frac·T⌋ samples train, remainder test.
    Temporal,
    /// Whole series assigned exclusively to one side.
    PerSeries,
    /// Keep the split tags the source already carries.
    Provided,
}

impl std::str::FromStr for SplitStrategy {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        match s {
            "temporal" => Ok(SplitStrategy::Temporal),
            "per_series" => Ok(SplitStrategy::PerSeries),
            "provided" => Ok(SplitStrategy::Provided),
            other => Err(Error::Config(format!("unknown split strategy `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SplitSpec {
    pub strategy: SplitStrategy,
    pub train_fraction: f64,
    pub seed: u64,
}

impl Default for SplitSpec {
    fn default() -> Self {
        SplitSpec {
            strategy: SplitStrategy::Temporal,
            train_fraction: 0.70,
            seed: 0,
        }
    }
}

impl SplitSpec {
    pub fn validate(&self) -> Result<()> {
        if !(self.train_fraction > 0.0 && self.train_fraction < 1.0) {
            return Err(Error::Config(format!(
                "train fraction must lie in (0,1), got {}",
                self.train_fraction
            )));
        }
        Ok(())
    }
}

fn slice_dataset(d: &CuratedDataset, from: usize, to: usize, split: Split) -> Result<CuratedDataset> {
    let c = d.num_channels();
    let t = d.len();
    let width = to - from;
    let mut flat = Vec::with_capacity(c * width);
    for ch in 0..c {
        for j in from..to {
            flat.push(d.channels.at(ch, j));
        }
    }
    let labels = match &d.labels {
        Some(Labels::PerTimestep(l)) => Some(Labels::PerTimestep(l[from..to].to_vec())),
        Some(Labels::PerSeries(v)) => Some(Labels::PerSeries(*v)),
        None => None,
    };
    let missing = d.missing.as_ref().map(|m| {
        let mut out = Vec::with_capacity(c * width);
        for ch in 0..c {
            out.extend_from_slice(&m[ch * t + from..ch * t + to]);
        }
        out
    });
    Ok(CuratedDataset {
        name: d.name.clone(),
        channels: Tensor::from_f64(&[c, width], &flat, DType::F64)?,
        channel_names: d.channel_names.clone(),
        sampling_period_ms: d.sampling_period_ms,
        labels,
        missing,
        split,
    })
}

/// Temporal split: the first ⌊frac·T⌋ samples become the train side.
pub fn split_temporal(d: &CuratedDataset, frac: f64) -> Result<(CuratedDataset, CuratedDataset)> {
    let t = d.len();
    if t < 2 {
        return Err(Error::data(format!(
            "dataset {} too short to split (T={t})",
            d.name
        )));
    }
    let cut = ((frac * t as f64).floor() as usize).clamp(1, t - 1);
    Ok((
        slice_dataset(d, 0, cut, Split::Train)?,
        slice_dataset(d, cut, t, Split::Test)?,
    ))
}

/// Per-series split: a deterministic shuffle assigns each complete series
/// to exactly one side; ⌈frac·count⌉ go to train.
pub fn split_per_series(
    datasets: Vec<CuratedDataset>,
    frac: f64,
    seed: u64,
) -> Result<(Vec<CuratedDataset>, Vec<CuratedDataset>)> {
    let count = datasets.len();
    if count < 2 {
        return Err(Error::data(format!(
            "need at least 2 series for a per-series split, got {count}"
        )));
    }
    let mut order: Vec<usize> = (0..count).collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    order.shuffle(&mut rng);
    let n_train = ((frac * count as f64).ceil() as usize).clamp(1, count - 1);
    let train_set: std::collections::BTreeSet<usize> = order[..n_train].iter().copied().collect();
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (i, mut d) in datasets.into_iter().enumerate() {
        if train_set.contains(&i) {
            d.split = Split::Train;
            train.push(d);
        } else {
            d.split = Split::Test;
            test.push(d);
        }
    }
    Ok((train, test))
}

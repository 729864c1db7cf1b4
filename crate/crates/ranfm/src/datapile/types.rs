//! Data carriers for the curation pipeline.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::{DType, Tensor};

/// One ingested CSV table: aligned-length columns with per-cell missing
/// flags, millisecond timestamps, and an optional label column.
#[derive(Debug, Clone)]
pub struct RawTable {
    pub timestamps_ms: Vec<i64>,
    pub columns: Vec<RawColumn>,
    /// Values of a column literally named `label`, if present.
    pub labels: Option<Vec<f64>>,
    pub provenance: String,
}

#[derive(Debug, Clone)]
pub struct RawColumn {
    pub name: String,
    /// NaN where missing.
    pub values: Vec<f64>,
    pub missing: Vec<bool>,
}

impl RawColumn {
    pub fn observed(&self) -> impl Iterator<Item = f64> + '_ {
        self.values
            .iter()
            .zip(&self.missing)
            .filter(|(_, &m)| !m)
            .map(|(&v, _)| v)
    }
}

impl RawTable {
    pub fn len(&self) -> usize {
        self.timestamps_ms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.timestamps_ms.is_empty()
    }

    /// Keep only the rows at the given (sorted) indices.
    pub fn select_rows(&self, keep: &[usize]) -> RawTable {
        RawTable {
            timestamps_ms: keep.iter().map(|&i| self.timestamps_ms[i]).collect(),
            columns: self
                .columns
                .iter()
                .map(|c| RawColumn {
                    name: c.name.clone(),
                    values: keep.iter().map(|&i| c.values[i]).collect(),
                    missing: keep.iter().map(|&i| c.missing[i]).collect(),
                })
                .collect(),
            labels: self
                .labels
                .as_ref()
                .map(|l| keep.iter().map(|&i| l[i]).collect()),
            provenance: self.provenance.clone(),
        }
    }
}

/// Train/test tag on a curated dataset.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Test,
}

impl std::fmt::Display for Split {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            Split::Train => write!(f, "train"),
            Split::Test => write!(f, "test"),
        }
    }
}

/// Labels attached to a curated dataset.
#[derive(Debug, Clone, PartialEq)]
pub enum Labels {
    /// One label per timestep (anomaly 0/1 flags or per-step class ids).
    PerTimestep(Vec<u32>),
    /// A single label for the whole series.
    PerSeries(u32),
}

impl Labels {
    pub fn kind_str(&self) -> &'static str {
        match self {
            Labels::PerTimestep(_) => "per_timestep",
            Labels::PerSeries(_) => "per_series",
        }
    }
}

/// The unit of training and evaluation: a fully curated C×T channel matrix
/// plus sampling metadata, optional labels, and an optional missing mask
/// (imputation datasets only).
#[derive(Debug, Clone)]
pub struct CuratedDataset {
    pub name: String,
    /// C×T matrix, 64-bit on the data side.
    pub channels: Tensor,
    pub channel_names: Vec<String>,
    pub sampling_period_ms: f64,
    pub labels: Option<Labels>,
    /// Flat C×T mask; `true` marks a missing sample. Present only on
    /// datasets flagged for the imputation task.
    pub missing: Option<Vec<bool>>,
    pub split: Split,
}

impl CuratedDataset {
    pub fn num_channels(&self) -> usize {
        self.channels.shape()[0]
    }

    pub fn len(&self) -> usize {
        self.channels.shape()[1]
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Total measurement count C·T.
    pub fn num_samples(&self) -> usize {
        self.channels.numel()
    }

    pub fn channel(&self, c: usize) -> Vec<f64> {
        let t = self.len();
        (0..t).map(|j| self.channels.at(c, j)).collect()
    }

    pub fn validate(&self) -> Result<()> {
        if self.channel_names.len() != self.num_channels() {
            return Err(Error::data("channel name count mismatch"));
        }
        if let Some(Labels::PerTimestep(l)) = &self.labels {
            if l.len() != self.len() {
                return Err(Error::data("label length mismatch"));
            }
        }
        match &self.missing {
            None => {
                if !self.channels.is_all_finite() {
                    return Err(Error::data(format!(
                        "dataset {} has missing values but no missing mask",
                        self.name
                    )));
                }
            }
            Some(m) => {
                if m.len() != self.channels.numel() {
                    return Err(Error::data("missing mask length mismatch"));
                }
            }
        }
        Ok(())
    }
}

/// Make a curated dataset directly from channel rows (fixtures, simulator).
pub fn dataset_from_rows(
    name: &str,
    rows: &[Vec<f64>],
    channel_names: &[&str],
    sampling_period_ms: f64,
    split: Split,
) -> Result<CuratedDataset> {
    Ok(CuratedDataset {
        name: name.to_string(),
        channels: Tensor::from_rows(rows, DType::F64)?,
        channel_names: channel_names.iter().map(|s| s.to_string()).collect(),
        sampling_period_ms,
        labels: None,
        missing: None,
        split,
    })
}

/// One dropped channel/segment/row and why.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DroppedItem {
    pub item: String,
    pub reason: String,
}

/// Everything the pipeline discarded or repaired for one dataset.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
pub struct CurationReport {
    pub dropped: Vec<DroppedItem>,
    /// Missing cells filled by linear interpolation (non-imputation sets).
    pub filled_missing: usize,
}

/// Sidecar metadata written next to every curated dataset.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Manifest {
    pub name: String,
    pub task: String,
    pub channels: Vec<String>,
    pub length: usize,
    pub sampling_period_ms: f64,
    pub split: String,
    pub label_kind: Option<String>,
    pub files: Vec<String>,
    pub curation_report: CurationReport,
    pub seed: u64,
}

//! Sliding-window streaming inference over a CSV sample stream.

use std::collections::VecDeque;
use std::io::Read;

use serde::Serialize;

use crate::error::{Error, Result};
use crate::model::{revin_denormalize, revin_normalize, Model};
use crate::tasks::anomaly::anomaly_score;
use crate::tasks::imputation::impute;
use crate::tensor::{DType, Tensor};
use crate::training::pretrain::REVIN_EPS;
use crate::training::FinetuneTask;

/// Per-channel ring buffer of the most recent T samples plus the counters
/// deciding when inference fires.
#[derive(Debug)]
pub struct StreamState {
    buffers: Vec<VecDeque<f64>>,
    missing: Vec<VecDeque<bool>>,
    timestamps: VecDeque<f64>,
    window: usize,
    hop: usize,
    samples_seen: usize,
}

impl StreamState {
    pub fn new(channels: usize, window: usize, hop: usize) -> Result<Self> {
        if channels == 0 || window == 0 {
            return Err(Error::Config("need at least one channel and sample".into()));
        }
        if hop == 0 {
            return Err(Error::Config("hop must be >= 1".into()));
        }
        Ok(StreamState {
            buffers: vec![VecDeque::with_capacity(window); channels],
            missing: vec![VecDeque::with_capacity(window); channels],
            timestamps: VecDeque::with_capacity(window),
            window,
            hop,
            samples_seen: 0,
        })
    }

    pub fn channels(&self) -> usize {
        self.buffers.len()
    }

    /// Push one multivariate sample; returns true when a full buffer sits on
    /// a hop boundary (offsets 0, hop, 2·hop, … from the first full window).
    pub fn push(&mut self, ts_ms: f64, sample: &[f64], missing: &[bool]) -> Result<bool> {
        if sample.len() != self.buffers.len() {
            return Err(Error::data(format!(
                "channel count drift mid-stream: got {} values for {} channels",
                sample.len(),
                self.buffers.len()
            )));
        }
        for (ch, buf) in self.buffers.iter_mut().enumerate() {
            if buf.len() == self.window {
                buf.pop_front();
                self.missing[ch].pop_front();
            }
            buf.push_back(sample[ch]);
            self.missing[ch].push_back(missing[ch]);
        }
        if self.timestamps.len() == self.window {
            self.timestamps.pop_front();
        }
        self.timestamps.push_back(ts_ms);
        self.samples_seen += 1;
        Ok(self.samples_seen >= self.window && (self.samples_seen - self.window) % self.hop == 0)
    }

    /// The buffered window as a C×T matrix, oldest sample first, missing
    /// samples zero-filled, plus the flat missing mask.
    pub fn window_matrix(&self, dtype: DType) -> Result<(Tensor, Vec<bool>)> {
        let c = self.buffers.len();
        let t = self.window;
        let mut flat = Vec::with_capacity(c * t);
        let mut mask = Vec::with_capacity(c * t);
        for ch in 0..c {
            for (v, &m) in self.buffers[ch].iter().zip(self.missing[ch].iter()) {
                flat.push(if m { 0.0 } else { *v });
                mask.push(m);
            }
        }
        Ok((Tensor::from_f64(&[c, t], &flat, dtype)?, mask))
    }

    pub fn newest_timestamp(&self) -> Option<f64> {
        self.timestamps.back().copied()
    }

    pub fn timestamps(&self) -> impl Iterator<Item = f64> + '_ {
        self.timestamps.iter().copied()
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct AnomalyPayload {
    pub peak_score: f64,
    pub peak_ts_ms: f64,
    pub mean_score: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct ClassPayload {
    pub predicted: usize,
    pub logits: Vec<f64>,
}

#[derive(Debug, Clone, Serialize)]
pub struct ImputedSample {
    pub channel: usize,
    pub ts_ms: f64,
    pub value: f64,
}

/// One timestamped inference record.
#[derive(Debug, Clone, Serialize)]
pub struct StreamRecord {
    pub window: usize,
    pub end_ts_ms: f64,
    pub task: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub anomaly: Option<AnomalyPayload>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub class: Option<ClassPayload>,
    /// Denormalized per-channel forecast, C×H.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub forecast: Option<Vec<Vec<f64>>>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub imputed: Option<Vec<ImputedSample>>,
}

fn task_tag(task: FinetuneTask) -> &'static str {
    match task {
        FinetuneTask::Anomaly => "anomaly",
        FinetuneTask::Classify => "classify",
        FinetuneTask::Forecast => "forecast",
        FinetuneTask::Impute => "impute",
    }
}

/// Run one task over a full buffered window.
pub fn infer_window(
    model: &Model,
    task: FinetuneTask,
    state: &StreamState,
    window_index: usize,
) -> Result<StreamRecord> {
    let (win, mask) = state.window_matrix(DType::F64)?;
    let end_ts = state.newest_timestamp().unwrap_or(0.0);
    if task != FinetuneTask::Impute && mask.iter().any(|&m| m) {
        return Err(Error::data(
            "NaN sample in the stream outside an imputation mask",
        ));
    }
    let mut record = StreamRecord {
        window: window_index,
        end_ts_ms: end_ts,
        task: task_tag(task).to_string(),
        anomaly: None,
        class: None,
        forecast: None,
        imputed: None,
    };
    match task {
        FinetuneTask::Anomaly => {
            let (xn, _) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
            let recon = model.reconstruct_window(&xn)?;
            let covered = model.cfg.num_patches() * model.cfg.patch_len;
            let c = xn.shape()[0];
            let mut x_cov = Vec::with_capacity(c * covered);
            for ch in 0..c {
                for j in 0..covered {
                    x_cov.push(xn.at(ch, j));
                }
            }
            let x_cov = Tensor::from_f64(&[c, covered], &x_cov, recon.dtype())?;
            let scores = anomaly_score(&x_cov, &recon)?;
            let ts: Vec<f64> = state.timestamps().collect();
            let mut peak = 0usize;
            for (i, s) in scores.iter().enumerate() {
                if *s > scores[peak] {
                    peak = i;
                }
            }
            record.anomaly = Some(AnomalyPayload {
                peak_score: scores[peak],
                peak_ts_ms: ts[peak],
                mean_score: scores.iter().sum::<f64>() / scores.len() as f64,
            });
        }
        FinetuneTask::Classify => {
            let (xn, _) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
            let logits = model.classify_window(&xn)?;
            let vals = logits.to_f64_vec();
            let mut best = 0;
            for j in 1..vals.len() {
                if vals[j] > vals[best] {
                    best = j;
                }
            }
            record.class = Some(ClassPayload {
                predicted: best,
                logits: vals,
            });
        }
        FinetuneTask::Forecast => {
            let (xn, stats) = revin_normalize(&win.cast(model.dtype()), REVIN_EPS)?;
            let pred = revin_denormalize(&model.forecast_window(&xn)?, &stats)?;
            let (c, h) = (pred.shape()[0], pred.shape()[1]);
            let mut rows = Vec::with_capacity(c);
            for ch in 0..c {
                rows.push((0..h).map(|j| pred.at(ch, j)).collect());
            }
            record.forecast = Some(rows);
        }
        FinetuneTask::Impute => {
            let mut imputed = Vec::new();
            if mask.iter().any(|&m| m) {
                let filled = impute(&win, &mask, model)?;
                let ts: Vec<f64> = state.timestamps().collect();
                let t = state.window;
                for ch in 0..state.channels() {
                    for j in 0..t {
                        if mask[ch * t + j] {
                            imputed.push(ImputedSample {
                                channel: ch,
                                ts_ms: ts[j],
                                value: filled.at(ch, j),
                            });
                        }
                    }
                }
            }
            record.imputed = Some(imputed);
        }
    }
    Ok(record)
}

/// Stream CSV samples (same contract as the data pipeline input) through the
/// model, emitting one record per hop boundary once the buffer is full.
/// Returns the emitted record count.
pub fn stream_infer<R: Read, F>(
    source: R,
    model: &Model,
    task: FinetuneTask,
    hop: usize,
    mut emit: F,
) -> Result<usize>
where
    F: FnMut(&StreamRecord) -> Result<()>,
{
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .flexible(true)
        .from_reader(source);
    let headers = rdr
        .headers()
        .map_err(|e| Error::data(format!("stream missing header row: {e}")))?
        .clone();
    if headers.is_empty() || headers[0].trim() != "timestamp" {
        return Err(Error::data(
            "stream's first column must be named `timestamp`",
        ));
    }
    let label_idx = headers
        .iter()
        .skip(1)
        .position(|h| h.trim() == "label")
        .map(|i| i + 1);
    let channels = headers.len() - 1 - usize::from(label_idx.is_some());
    if channels == 0 {
        return Err(Error::data("stream has no data channels"));
    }

    let mut state = StreamState::new(channels, model.cfg.window_len, hop)?;
    let mut emitted = 0usize;
    let mut window_index = 0usize;
    for record in rdr.records() {
        let record = record?;
        if record.len() != headers.len() {
            return Err(Error::data(format!(
                "channel count drift mid-stream: row has {} fields, header {}",
                record.len(),
                headers.len()
            )));
        }
        let ts: f64 = record[0]
            .trim()
            .parse()
            .map_err(|_| Error::data(format!("bad stream timestamp `{}`", &record[0])))?;
        let mut sample = Vec::with_capacity(channels);
        let mut missing = Vec::with_capacity(channels);
        for (i, cell) in record.iter().enumerate().skip(1) {
            if Some(i) == label_idx {
                continue;
            }
            let cell = cell.trim();
            if cell.is_empty() || cell.eq_ignore_ascii_case("nan") {
                sample.push(f64::NAN);
                missing.push(true);
            } else {
                let v: f64 = cell
                    .parse()
                    .map_err(|_| Error::data(format!("bad stream value `{cell}`")))?;
                sample.push(v);
                missing.push(false);
            }
        }
        if task != FinetuneTask::Impute && missing.iter().any(|&m| m) {
            return Err(Error::data(
                "NaN sample in the stream outside an imputation mask",
            ));
        }
        if state.push(ts, &sample, &missing)? {
            let rec = infer_window(model, task, &state, window_index)?;
            emit(&rec)?;
            emitted += 1;
            window_index += 1;
        }
    }
    Ok(emitted)
}

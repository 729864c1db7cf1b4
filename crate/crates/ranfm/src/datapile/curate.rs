//! End-to-end curation: ingest → filter → align → prune → interpolate →
//! optional anomaly injection → split → manifest, with a per-dataset report
//! of everything dropped or repaired.

use std::io::Write;
use std::path::{Path, PathBuf};

use crate::datapile::align::{align_temporal, sampling_period_ms};
use crate::datapile::filter::filter_channels;
use crate::datapile::ingest::ingest_csv;
use crate::datapile::inject::{inject_anomalies, AnomalySpec};
use crate::datapile::interpolate::{interpolate_sparse, DEFAULT_TARGET_MIN};
use crate::datapile::prune::{prune_channels, DEFAULT_CORR_MAX, DEFAULT_SIGMA_REL_MIN};
use crate::datapile::split::{split_per_series, split_temporal, SplitSpec, SplitStrategy};
use crate::datapile::types::{
    CurationReport, CuratedDataset, Labels, Manifest, RawTable, Split,
};
use crate::error::{Error, Result};
use crate::parallel::map_indexed;
use crate::tensor::{DType, Tensor};

#[derive(Debug, Clone)]
pub struct CurateOptions {
    pub split: SplitSpec,
    pub inject: Vec<AnomalySpec>,
    /// Manifest task tag; defaults to "pretrain", or "anomaly_detection"
    /// when anomalies are injected.
    pub task: Option<String>,
    /// Keep missing samples as an imputation mask instead of filling them.
    pub keep_missing: bool,
    pub target_min_len: usize,
    pub sigma_rel_min: f64,
    pub corr_max: f64,
}

impl Default for CurateOptions {
    fn default() -> Self {
        CurateOptions {
            split: SplitSpec::default(),
            inject: Vec::new(),
            task: None,
            keep_missing: false,
            target_min_len: DEFAULT_TARGET_MIN,
            sigma_rel_min: DEFAULT_SIGMA_REL_MIN,
            corr_max: DEFAULT_CORR_MAX,
        }
    }
}

impl CurateOptions {
    fn task_tag(&self) -> String {
        if let Some(t) = &self.task {
            return t.clone();
        }
        if !self.inject.is_empty() {
            "anomaly_detection".to_string()
        } else if self.keep_missing {
            "imputation".to_string()
        } else {
            "pretrain".to_string()
        }
    }
}

/// Fill a channel's missing samples by linear interpolation between flanking
/// observed values, holding edges. Returns the filled count.
fn fill_linear(values: &mut [f64], missing: &[bool]) -> usize {
    let n = values.len();
    let observed: Vec<usize> = (0..n).filter(|&i| !missing[i]).collect();
    if observed.is_empty() {
        return 0;
    }
    let mut filled = 0;
    for i in 0..n {
        if !missing[i] {
            continue;
        }
        let next = observed.partition_point(|&o| o < i);
        let right = observed.get(next).copied();
        let left = if next > 0 { Some(observed[next - 1]) } else { None };
        values[i] = match (left, right) {
            (Some(l), Some(r)) => {
                let w = (i - l) as f64 / (r - l) as f64;
                values[l] * (1.0 - w) + values[r] * w
            }
            (Some(l), None) => values[l],
            (None, Some(r)) => values[r],
            (None, None) => unreachable!(),
        };
        filled += 1;
    }
    filled
}

/// Run the transform stages (no split, no injection) over an ingested table.
pub fn curate_table(
    table: &RawTable,
    name: &str,
    opts: &CurateOptions,
) -> Result<(CuratedDataset, CurationReport)> {
    let mut report = CurationReport::default();
    let (table, dropped) = filter_channels(table)?;
    report.dropped.extend(dropped);
    let (table, dropped) = align_temporal(&table)?;
    report.dropped.extend(dropped);
    let (table, dropped) = prune_channels(&table, opts.sigma_rel_min, opts.corr_max)?;
    report.dropped.extend(dropped);
    let table = interpolate_sparse(&table, opts.target_min_len)?;

    let period = sampling_period_ms(&table);
    let c = table.columns.len();
    let t = table.len();
    let mut flat = Vec::with_capacity(c * t);
    let mut missing_flat = Vec::with_capacity(c * t);
    for col in &table.columns {
        let mut values = col.values.clone();
        if opts.keep_missing {
            missing_flat.extend(col.missing.iter().copied());
            // placeholder zeros keep the matrix finite where masked
            for (v, &m) in values.iter_mut().zip(&col.missing) {
                if m {
                    *v = 0.0;
                }
            }
        } else {
            if col.missing.iter().all(|&m| m) {
                return Err(Error::data(format!("channel {} entirely missing", col.name)));
            }
            report.filled_missing += fill_linear(&mut values, &col.missing);
        }
        flat.extend(values);
    }

    let labels = table.labels.as_ref().map(|l| {
        Labels::PerTimestep(l.iter().map(|&v| v.round().max(0.0) as u32).collect())
    });

    let mut dataset = CuratedDataset {
        name: name.to_string(),
        channels: Tensor::from_f64(&[c, t], &flat, DType::F64)?,
        channel_names: table.columns.iter().map(|c| c.name.clone()).collect(),
        sampling_period_ms: period,
        labels,
        missing: if opts.keep_missing {
            Some(missing_flat)
        } else {
            None
        },
        split: Split::Train,
    };
    if !opts.inject.is_empty() {
        dataset = inject_anomalies(&dataset, &opts.inject)?;
    }
    dataset.validate()?;
    Ok((dataset, report))
}

/// One curated dataset with its sidecar manifest and split halves.
#[derive(Debug, Clone)]
pub struct CuratedEntry {
    pub manifest: Manifest,
    pub parts: Vec<CuratedDataset>,
}

#[derive(Debug, Default)]
pub struct CurateSummary {
    pub entries: Vec<CuratedEntry>,
    pub failures: Vec<(String, String)>,
}

fn split_tag(s: SplitStrategy) -> &'static str {
    match s {
        SplitStrategy::Temporal => "temporal",
        SplitStrategy::PerSeries => "per_series",
        SplitStrategy::Provided => "provided",
    }
}

fn make_manifest(
    name: &str,
    opts: &CurateOptions,
    full: &CuratedDataset,
    parts: &[CuratedDataset],
    report: CurationReport,
) -> Manifest {
    Manifest {
        name: name.to_string(),
        task: opts.task_tag(),
        channels: full.channel_names.clone(),
        length: full.len(),
        sampling_period_ms: full.sampling_period_ms,
        split: split_tag(opts.split.strategy).to_string(),
        label_kind: full.labels.as_ref().map(|l| l.kind_str().to_string()),
        files: parts
            .iter()
            .map(|p| format!("{}.csv", p.split))
            .collect(),
        curation_report: report,
        seed: opts.split.seed,
    }
}

/// Curate one file or every `*.csv` under a directory (lexicographic order,
/// concurrently per file). Failures are collected per file; the remaining
/// files are still curated.
pub fn curate_path(input: &Path, opts: &CurateOptions) -> Result<CurateSummary> {
    opts.split.validate()?;
    let mut files: Vec<PathBuf> = if input.is_dir() {
        std::fs::read_dir(input)?
            .filter_map(|e| e.ok())
            .map(|e| e.path())
            .filter(|p| p.extension().map(|x| x == "csv").unwrap_or(false))
            .collect()
    } else {
        vec![input.to_path_buf()]
    };
    files.sort();
    if files.is_empty() {
        return Err(Error::data(format!(
            "no CSV files under {}",
            input.display()
        )));
    }

    let curated: Vec<(String, Result<(CuratedDataset, CurationReport)>)> =
        map_indexed(files.len(), true, |i| {
            let path = &files[i];
            let name = path
                .file_stem()
                .map(|s| s.to_string_lossy().to_string())
                .unwrap_or_else(|| format!("dataset{i}"));
            let result = ingest_csv(path).and_then(|t| curate_table(&t, &name, opts));
            (name, result)
        });

    let mut summary = CurateSummary::default();
    let mut ok: Vec<(String, CuratedDataset, CurationReport)> = Vec::new();
    for (name, result) in curated {
        match result {
            Ok((d, r)) => ok.push((name, d, r)),
            Err(e) => summary.failures.push((name, e.to_string())),
        }
    }

    match opts.split.strategy {
        SplitStrategy::Temporal => {
            for (name, full, report) in ok {
                let (train, test) = split_temporal(&full, opts.split.train_fraction)?;
                let parts = vec![train, test];
                let manifest = make_manifest(&name, opts, &full, &parts, report);
                summary.entries.push(CuratedEntry { manifest, parts });
            }
        }
        SplitStrategy::Provided => {
            for (name, full, report) in ok {
                let parts = vec![full.clone()];
                let manifest = make_manifest(&name, opts, &full, &parts, report);
                summary.entries.push(CuratedEntry { manifest, parts });
            }
        }
        SplitStrategy::PerSeries => {
            let datasets: Vec<CuratedDataset> = ok.iter().map(|(_, d, _)| d.clone()).collect();
            let (train, _) =
                split_per_series(datasets, opts.split.train_fraction, opts.split.seed)?;
            let side_of = |name: &str| -> Split {
                if train.iter().any(|d| d.name == name) {
                    Split::Train
                } else {
                    Split::Test
                }
            };
            for (name, full, report) in ok {
                let side = side_of(&name);
                let mut tagged = full.clone();
                tagged.split = side;
                let parts = vec![tagged];
                let manifest = make_manifest(&name, opts, &full, &parts, report);
                summary.entries.push(CuratedEntry { manifest, parts });
            }
        }
    }
    Ok(summary)
}

// ---------------------------------------------------------------------------
// persistence: curated CSV + manifest JSON
// ---------------------------------------------------------------------------

fn format_value(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v}")
    }
}

/// Write one curated dataset in the input CSV contract (timestamp column,
/// channels, optional label column; missing samples as NaN).
pub fn write_curated_csv(d: &CuratedDataset, path: &Path) -> Result<()> {
    let mut out = String::new();
    out.push_str("timestamp");
    for name in &d.channel_names {
        out.push(',');
        out.push_str(name);
    }
    let labels: Option<Vec<u32>> = match &d.labels {
        Some(Labels::PerTimestep(l)) => Some(l.clone()),
        Some(Labels::PerSeries(v)) => Some(vec![*v; d.len()]),
        None => None,
    };
    if labels.is_some() {
        out.push_str(",label");
    }
    out.push('\n');
    let integral = d.sampling_period_ms.fract() == 0.0;
    for j in 0..d.len() {
        let ts = j as f64 * d.sampling_period_ms;
        if integral {
            out.push_str(&format!("{}", ts as i64));
        } else {
            out.push_str(&format!("{}", ts / 1000.0));
        }
        for ch in 0..d.num_channels() {
            out.push(',');
            let v = if d
                .missing
                .as_ref()
                .map(|m| m[ch * d.len() + j])
                .unwrap_or(false)
            {
                f64::NAN
            } else {
                d.channels.at(ch, j)
            };
            out.push_str(&format_value(v));
        }
        if let Some(l) = &labels {
            out.push(',');
            out.push_str(&l[j].to_string());
        }
        out.push('\n');
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(out.as_bytes())?;
    Ok(())
}

/// Write an entry's manifest and per-split CSV files under `dir/<name>/`.
pub fn write_entry(entry: &CuratedEntry, out_dir: &Path) -> Result<PathBuf> {
    let dir = out_dir.join(&entry.manifest.name);
    std::fs::create_dir_all(&dir)?;
    for part in &entry.parts {
        write_curated_csv(part, &dir.join(format!("{}.csv", part.split)))?;
    }
    let json = serde_json::to_vec_pretty(&entry.manifest)?;
    std::fs::write(dir.join("manifest.json"), json)?;
    Ok(dir)
}

/// Load a curated dataset directory tree written by [`write_entry`].
pub fn load_curated_dir(dir: &Path) -> Result<Vec<CuratedEntry>> {
    let mut subdirs: Vec<PathBuf> = std::fs::read_dir(dir)?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_dir() && p.join("manifest.json").exists())
        .collect();
    subdirs.sort();
    if subdirs.is_empty() {
        return Err(Error::data(format!(
            "no curated datasets (manifest.json) under {}",
            dir.display()
        )));
    }
    let mut entries = Vec::new();
    for sub in subdirs {
        let manifest: Manifest =
            serde_json::from_slice(&std::fs::read(sub.join("manifest.json"))?)?;
        let mut parts = Vec::new();
        for file in &manifest.files {
            let split = if file.starts_with("test") {
                Split::Test
            } else {
                Split::Train
            };
            parts.push(read_curated_csv(
                &sub.join(file),
                &manifest.name,
                manifest.sampling_period_ms,
                split,
                manifest.task == "imputation",
            )?);
        }
        entries.push(CuratedEntry { manifest, parts });
    }
    Ok(entries)
}

/// Read back a curated CSV (already uniform and pruned).
pub fn read_curated_csv(
    path: &Path,
    name: &str,
    sampling_period_ms: f64,
    split: Split,
    imputation: bool,
) -> Result<CuratedDataset> {
    let table = ingest_csv(path)?;
    let c = table.columns.len();
    let t = table.len();
    let mut flat = Vec::with_capacity(c * t);
    let mut missing = Vec::with_capacity(c * t);
    let mut any_missing = false;
    for col in &table.columns {
        for (v, &m) in col.values.iter().zip(&col.missing) {
            flat.push(if m { 0.0 } else { *v });
            missing.push(m);
            any_missing |= m;
        }
    }
    if any_missing && !imputation {
        return Err(Error::data(format!(
            "{}: missing values in a non-imputation dataset",
            path.display()
        )));
    }
    let labels = table
        .labels
        .map(|l| Labels::PerTimestep(l.iter().map(|&v| v.round().max(0.0) as u32).collect()));
    let d = CuratedDataset {
        name: name.to_string(),
        channels: Tensor::from_f64(&[c, t], &flat, DType::F64)?,
        channel_names: table.columns.iter().map(|c| c.name.clone()).collect(),
        sampling_period_ms,
        labels,
        missing: if imputation { Some(missing) } else { None },
        split,
    };
    d.validate()?;
    Ok(d)
}

//! Command-line interface: curation, pretraining, fine-tuning, evaluation,
//! streaming inference, telemetry simulation, and benchmarking.
//!
//! Exit codes: 0 success, 1 usage/configuration error, 2 data error,
//! 3 numeric failure.

use std::io::Write;
use std::path::{Path, PathBuf};

use clap::error::ErrorKind;
use clap::{Parser, Subcommand};
use serde::Deserialize;

use ranfm::datapile::{
    load_curated_dir, write_curated_csv, write_entry, AnomalySpec, CurateOptions, CuratedDataset,
    SplitSpec, SplitStrategy,
};
use ranfm::model::{HeadSpec, Model, ModelConfig, Variant};
use ranfm::ops::Activation;
use ranfm::runtime::{
    bench, bench_csv, load_checkpoint, save_checkpoint, simulate_telemetry, Scenario, ScenarioSpec,
};
use ranfm::tasks::{baseline_impute, evaluate, BaselineKind, EvalOptions, EvalReport};
use ranfm::tensor::DType;
use ranfm::training::{finetune, pretrain, write_loss_csv, FinetuneTask, Regime, TrainConfig};
use ranfm::{Error, Result};

#[derive(Parser)]
#[command(
    name = "ranfm",
    version,
    about = "Multi-task time-series modeling for RAN telemetry",
    disable_help_subcommand = true
)]
struct Cli {
    /// Global random seed (overrides config-file seeds when given).
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Numeric precision for newly initialized or cast models.
    #[arg(long, global = true, value_parser = ["32", "64"])]
    precision: Option<String>,
    /// Suppress progress output on stderr.
    #[arg(long, global = true)]
    quiet: bool,
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the curation pipeline over a CSV file or directory.
    Curate {
        input: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// JSON file holding a list of anomaly specs to inject.
        #[arg(long)]
        inject_anomalies: Option<PathBuf>,
        #[arg(long, default_value = "temporal")]
        split: String,
    },
    /// Masked pretraining over a curated data directory.
    Pretrain {
        #[arg(long)]
        data: PathBuf,
        /// TOML file with [model] and [train] sections.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Adapt a pretrained checkpoint to a task.
    Finetune {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        regime: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Evaluate a checkpoint on the test splits of a curated directory.
    Eval {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        task: String,
        #[arg(long)]
        data: PathBuf,
        #[arg(long)]
        report: PathBuf,
    },
    /// Sliding-window streaming inference over a CSV stream.
    Infer {
        #[arg(long)]
        ckpt: PathBuf,
        #[arg(long)]
        task: String,
        /// CSV path, or `-` for standard input.
        #[arg(long)]
        stream: String,
        #[arg(long, default_value_t = 64)]
        hop: usize,
    },
    /// Generate a synthetic labeled telemetry scenario.
    Simulate {
        #[arg(long)]
        scenario: String,
        #[arg(long)]
        out: PathBuf,
        /// Trace length in samples.
        #[arg(long, default_value_t = 2048)]
        duration: usize,
    },
    /// Measure per-window inference latency and memory.
    Bench {
        #[arg(long)]
        ckpt: PathBuf,
        /// Comma-separated window lengths.
        #[arg(long)]
        window: String,
        /// Comma-separated channel counts.
        #[arg(long)]
        channels: String,
        #[arg(long, default_value_t = 10)]
        repeat: usize,
    },
}

fn exit_code(e: &Error) -> i32 {
    match e {
        Error::NonFinite(_) | Error::TrainingDivergence(_) => 3,
        Error::Config(_) | Error::UnsupportedRegime(_) | Error::MixedPrecision(_) => 1,
        _ => 2,
    }
}

/// Run the CLI on the given arguments (excluding argv[0]); returns the
/// process exit code.
pub fn run_cli<I, S>(args: I) -> i32
where
    I: IntoIterator<Item = S>,
    S: Into<String>,
{
    let mut argv: Vec<String> = vec!["ranfm".to_string()];
    argv.extend(args.into_iter().map(Into::into));
    let cli = match Cli::try_parse_from(&argv) {
        Ok(cli) => cli,
        Err(e) => {
            return match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => {
                    print!("{e}");
                    0
                }
                _ => {
                    eprint!("{e}");
                    1
                }
            };
        }
    };
    match dispatch(cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            exit_code(&e)
        }
    }
}

fn parse_precision(p: &Option<String>) -> Option<DType> {
    p.as_deref().map(|s| match s {
        "64" => DType::F64,
        _ => DType::F32,
    })
}

fn dispatch(cli: Cli) -> Result<()> {
    let precision = parse_precision(&cli.precision);
    let quiet = cli.quiet;
    match cli.command {
        Command::Curate {
            input,
            out,
            inject_anomalies,
            split,
        } => cmd_curate(
            &input,
            &out,
            inject_anomalies.as_deref(),
            &split,
            cli.seed,
            quiet,
        ),
        Command::Pretrain { data, config, out } => {
            cmd_pretrain(&data, &config, &out, cli.seed, precision, quiet)
        }
        Command::Finetune {
            ckpt,
            task,
            regime,
            data,
            out,
        } => cmd_finetune(&ckpt, &task, &regime, &data, &out, cli.seed, precision, quiet),
        Command::Eval {
            ckpt,
            task,
            data,
            report,
        } => cmd_eval(&ckpt, &task, &data, &report, cli.seed, precision, quiet),
        Command::Infer {
            ckpt,
            task,
            stream,
            hop,
        } => cmd_infer(&ckpt, &task, &stream, hop, precision),
        Command::Simulate {
            scenario,
            out,
            duration,
        } => cmd_simulate(&scenario, &out, duration, cli.seed, quiet),
        Command::Bench {
            ckpt,
            window,
            channels,
            repeat,
        } => cmd_bench(&ckpt, &window, &channels, repeat, precision),
    }
}

fn log(quiet: bool, msg: impl AsRef<str>) {
    if !quiet {
        eprintln!("{}", msg.as_ref());
    }
}

// ---------------------------------------------------------------------------
// curate
// ---------------------------------------------------------------------------

fn cmd_curate(
    input: &Path,
    out: &Path,
    inject: Option<&Path>,
    split: &str,
    seed: Option<u64>,
    quiet: bool,
) -> Result<()> {
    let strategy: SplitStrategy = split.parse()?;
    let inject: Vec<AnomalySpec> = match inject {
        Some(path) => serde_json::from_slice(&std::fs::read(path)?)?,
        None => Vec::new(),
    };
    let opts = CurateOptions {
        split: SplitSpec {
            strategy,
            train_fraction: 0.70,
            seed: seed.unwrap_or(0),
        },
        inject,
        ..CurateOptions::default()
    };
    let summary = ranfm::datapile::curate_path(input, &opts)?;
    std::fs::create_dir_all(out)?;
    for entry in &summary.entries {
        write_entry(entry, out)?;
        log(
            quiet,
            format!(
                "curated {}: {} channels × {} samples, {} dropped item(s)",
                entry.manifest.name,
                entry.manifest.channels.len(),
                entry.manifest.length,
                entry.manifest.curation_report.dropped.len()
            ),
        );
    }
    for (name, reason) in &summary.failures {
        log(quiet, format!("failed {name}: {reason}"));
    }
    if summary.entries.is_empty() {
        return Err(Error::data("every input file failed curation"));
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// pretrain
// ---------------------------------------------------------------------------

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct ModelSection {
    layers: usize,
    embed_dim: usize,
    num_heads: usize,
    ff_dim: usize,
    window_len: usize,
    patch_len: usize,
    head_layers: usize,
    activation: String,
    variant: String,
}

impl Default for ModelSection {
    fn default() -> Self {
        ModelSection {
            layers: 2,
            embed_dim: 32,
            num_heads: 4,
            ff_dim: 64,
            window_len: 64,
            patch_len: 8,
            head_layers: 2,
            activation: "relu".into(),
            variant: "custom".into(),
        }
    }
}

impl ModelSection {
    fn build(&self) -> Result<ModelConfig> {
        let base = match self.variant.as_str() {
            "small" => Some(ModelConfig::small()),
            "base" => Some(ModelConfig::base()),
            "large" => Some(ModelConfig::large()),
            "custom" => None,
            other => return Err(Error::Config(format!("unknown variant `{other}`"))),
        };
        let cfg = match base {
            Some(preset) => preset,
            None => ModelConfig {
                layers: self.layers,
                embed_dim: self.embed_dim,
                num_heads: self.num_heads,
                ff_dim: self.ff_dim,
                window_len: self.window_len,
                patch_len: self.patch_len,
                head_layers: self.head_layers,
                activation: self.activation.parse::<Activation>()?,
                variant: Variant::Custom,
            },
        };
        cfg.validate()?;
        Ok(cfg)
    }
}

#[derive(Deserialize)]
#[serde(default, deny_unknown_fields)]
struct TrainSection {
    mask_ratio: f64,
    weight_decay: f64,
    beta1: f64,
    beta2: f64,
    eps_opt: f64,
    clip_norm: f64,
    batch_size: usize,
    lr_max: f64,
    lr_min: f64,
    total_steps: usize,
    strides: Vec<usize>,
    seed: u64,
}

impl Default for TrainSection {
    fn default() -> Self {
        let t = TrainConfig::default();
        TrainSection {
            mask_ratio: t.mask_ratio,
            weight_decay: t.weight_decay,
            beta1: t.beta1,
            beta2: t.beta2,
            eps_opt: t.eps_opt,
            clip_norm: t.clip_norm,
            batch_size: t.batch_size,
            lr_max: t.lr_max,
            lr_min: t.lr_min,
            total_steps: t.total_steps,
            strides: t.strides,
            seed: t.seed,
        }
    }
}

impl TrainSection {
    fn build(&self, regime: Regime) -> TrainConfig {
        TrainConfig {
            mask_ratio: self.mask_ratio,
            weight_decay: self.weight_decay,
            beta1: self.beta1,
            beta2: self.beta2,
            eps_opt: self.eps_opt,
            clip_norm: self.clip_norm,
            batch_size: self.batch_size,
            lr_max: self.lr_max,
            lr_min: self.lr_min,
            total_steps: self.total_steps,
            strides: self.strides.clone(),
            seed: self.seed,
            regime,
        }
    }
}

#[derive(Default, Deserialize)]
#[serde(default, deny_unknown_fields)]
struct FileConfig {
    model: ModelSection,
    train: TrainSection,
}

fn read_config(path: &Path) -> Result<FileConfig> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("cannot read config {}: {e}", path.display())))?;
    toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

/// Train-split corpus for pretraining: anomaly-detection datasets are
/// excluded, imputation masks are resolved by linear fill.
fn pretrain_corpus(dir: &Path) -> Result<Vec<CuratedDataset>> {
    let entries = load_curated_dir(dir)?;
    let mut corpus = Vec::new();
    for entry in entries {
        if entry.manifest.task == "anomaly_detection" {
            continue;
        }
        for part in entry.parts {
            if part.split != ranfm::datapile::Split::Train {
                continue;
            }
            corpus.push(resolve_missing(part)?);
        }
    }
    if corpus.is_empty() {
        return Err(Error::data(format!(
            "no usable train splits under {}",
            dir.display()
        )));
    }
    Ok(corpus)
}

fn resolve_missing(mut d: CuratedDataset) -> Result<CuratedDataset> {
    if let Some(mask) = d.missing.take() {
        d.channels = baseline_impute(&d.channels, &mask, BaselineKind::Linear)?;
    }
    Ok(d)
}

fn cmd_pretrain(
    data: &Path,
    config: &Path,
    out: &Path,
    seed: Option<u64>,
    precision: Option<DType>,
    quiet: bool,
) -> Result<()> {
    let file = read_config(config)?;
    let model_cfg = file.model.build()?;
    let mut train_cfg = file.train.build(Regime::Pretrain);
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    let dtype = precision.unwrap_or(DType::F32);
    let corpus = pretrain_corpus(data)?;
    log(
        quiet,
        format!(
            "pretraining on {} dataset(s), {} steps, batch {}",
            corpus.len(),
            train_cfg.total_steps,
            train_cfg.batch_size
        ),
    );
    let mut model = Model::init(model_cfg, HeadSpec::reconstruction(), train_cfg.seed, dtype)?;
    let outcome = pretrain(&corpus, &mut model, &train_cfg)?;
    save_checkpoint(&model, &train_cfg, out)?;
    let loss_path = out.with_extension("loss.csv");
    write_loss_csv(&outcome.curve, &loss_path)?;
    log(
        quiet,
        format!(
            "saved {} (loss {} -> {}), curve at {}",
            out.display(),
            outcome.curve.first().map(|p| p.loss).unwrap_or(f64::NAN),
            outcome.curve.last().map(|p| p.loss).unwrap_or(f64::NAN),
            loss_path.display()
        ),
    );
    Ok(())
}

// ---------------------------------------------------------------------------
// finetune
// ---------------------------------------------------------------------------

fn train_splits(dir: &Path) -> Result<Vec<CuratedDataset>> {
    let entries = load_curated_dir(dir)?;
    let mut out = Vec::new();
    for entry in entries {
        for part in entry.parts {
            if part.split == ranfm::datapile::Split::Train {
                out.push(resolve_missing(part)?);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "no train splits under {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn test_splits(dir: &Path) -> Result<Vec<CuratedDataset>> {
    let entries = load_curated_dir(dir)?;
    let mut out = Vec::new();
    for entry in entries {
        for part in entry.parts {
            if part.split == ranfm::datapile::Split::Test {
                out.push(part);
            }
        }
    }
    if out.is_empty() {
        return Err(Error::data(format!(
            "no test splits under {}",
            dir.display()
        )));
    }
    Ok(out)
}

fn max_label(datasets: &[CuratedDataset]) -> Option<u32> {
    let mut max = None;
    for d in datasets {
        let m = match &d.labels {
            Some(ranfm::datapile::Labels::PerSeries(v)) => Some(*v),
            Some(ranfm::datapile::Labels::PerTimestep(l)) => l.iter().max().copied(),
            None => None,
        };
        max = match (max, m) {
            (None, v) => v,
            (v, None) => v,
            (Some(a), Some(b)) => Some(a.max(b)),
        };
    }
    max
}

/// Attach any heads the checkpoint lacks, keeping every existing tensor.
fn ensure_heads(model: Model, heads: HeadSpec, seed: u64) -> Result<Model> {
    if model.heads == heads {
        return Ok(model);
    }
    let mut fresh = Model::init(model.cfg.clone(), heads, seed, model.dtype())?;
    for (name, tensor) in model.params.iter() {
        if fresh.params.contains(name) {
            fresh.params.insert(name.to_string(), tensor.clone());
        }
    }
    Ok(fresh)
}

#[allow(clippy::too_many_arguments)]
fn cmd_finetune(
    ckpt: &Path,
    task: &str,
    regime: &str,
    data: &Path,
    out: &Path,
    seed: Option<u64>,
    precision: Option<DType>,
    quiet: bool,
) -> Result<()> {
    let task: FinetuneTask = task.parse()?;
    let regime: Regime = regime.parse()?;
    let (mut model, mut train_cfg) = load_checkpoint(ckpt)?;
    if let Some(dtype) = precision {
        model.params = model.params.cast(dtype);
    }
    if let Some(s) = seed {
        train_cfg.seed = s;
    }
    train_cfg.regime = regime;
    let datasets = train_splits(data)?;

    let mut heads = model.heads.clone();
    match task {
        FinetuneTask::Anomaly | FinetuneTask::Impute => heads.reconstruction = true,
        FinetuneTask::Classify => {
            let k = max_label(&datasets)
                .ok_or_else(|| Error::data("classification needs labeled datasets"))?
                as usize
                + 1;
            heads.num_classes = Some(k.max(2));
        }
        FinetuneTask::Forecast => {
            if heads.forecast_horizon.is_none() {
                let window = model.cfg.window_len;
                let h = [208usize, 128, 64, 32]
                    .into_iter()
                    .find(|h| datasets.iter().any(|d| d.len() >= window + h))
                    .ok_or_else(|| {
                        Error::data("no dataset long enough for any standard horizon")
                    })?;
                heads.forecast_horizon = Some(h);
            }
        }
    }
    let mut model = ensure_heads(model, heads, train_cfg.seed)?;

    let outcome = finetune(&mut model, task, &datasets, regime, &train_cfg)?;
    save_checkpoint(&model, &train_cfg, out)?;
    if let (Some(first), Some(last)) = (outcome.curve.first(), outcome.curve.last()) {
        log(
            quiet,
            format!("finetuned: loss {} -> {}", first.loss, last.loss),
        );
    }
    log(quiet, format!("saved {}", out.display()));
    Ok(())
}

// ---------------------------------------------------------------------------
// eval / infer / simulate / bench
// ---------------------------------------------------------------------------

fn cmd_eval(
    ckpt: &Path,
    task: &str,
    data: &Path,
    report_path: &Path,
    seed: Option<u64>,
    precision: Option<DType>,
    quiet: bool,
) -> Result<()> {
    let task: FinetuneTask = task.parse()?;
    let (mut model, train_cfg) = load_checkpoint(ckpt)?;
    if let Some(dtype) = precision {
        model.params = model.params.cast(dtype);
    }
    let regime = match train_cfg.regime {
        Regime::Pretrain => Regime::ZeroShot,
        r => r,
    };
    let mut opts = EvalOptions::default();
    if let Some(s) = seed {
        opts.seed = s;
    }
    let datasets = test_splits(data)?;
    let mut reports: Vec<EvalReport> = Vec::new();
    for d in &datasets {
        let report = evaluate(&model, d, task, regime, &opts)?;
        log(quiet, format!("{}: {:?}", d.name, report.metrics));
        reports.push(report);
    }
    let json = if reports.len() == 1 {
        serde_json::to_string_pretty(&reports[0])?
    } else {
        serde_json::to_string_pretty(&reports)?
    };
    std::fs::write(report_path, json.as_bytes())?;
    log(quiet, format!("report written to {}", report_path.display()));
    Ok(())
}

fn cmd_infer(
    ckpt: &Path,
    task: &str,
    stream: &str,
    hop: usize,
    precision: Option<DType>,
) -> Result<()> {
    let task: FinetuneTask = task.parse()?;
    let (mut model, _) = load_checkpoint(ckpt)?;
    if let Some(dtype) = precision {
        model.params = model.params.cast(dtype);
    }
    let stdout = std::io::stdout();
    let mut out = stdout.lock();
    let emit = |record: &ranfm::runtime::StreamRecord| -> Result<()> {
        let line = serde_json::to_string(record)?;
        writeln!(out, "{line}")?;
        Ok(())
    };
    let result = if stream == "-" {
        ranfm::runtime::stream_infer(std::io::stdin().lock(), &model, task, hop, emit)
    } else {
        let file = std::fs::File::open(stream)
            .map_err(|e| Error::data(format!("cannot open stream {stream}: {e}")))?;
        ranfm::runtime::stream_infer(file, &model, task, hop, emit)
    };
    match result {
        // a downstream consumer closing the pipe is a normal way to stop
        Err(Error::Io(e)) if e.kind() == std::io::ErrorKind::BrokenPipe => Ok(()),
        other => other.map(|_| ()),
    }
}

fn cmd_simulate(
    scenario: &str,
    out: &Path,
    duration: usize,
    seed: Option<u64>,
    quiet: bool,
) -> Result<()> {
    let scenario: Scenario = scenario.parse()?;
    let spec = ScenarioSpec {
        duration,
        ..ScenarioSpec::new(scenario, duration, seed.unwrap_or(0))
    };
    let dataset = simulate_telemetry(&spec)?;
    write_curated_csv(&dataset, out)?;
    log(
        quiet,
        format!(
            "simulated {} ({} channels × {} samples) -> {}",
            scenario.name(),
            dataset.num_channels(),
            dataset.len(),
            out.display()
        ),
    );
    Ok(())
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    let vals: std::result::Result<Vec<usize>, _> =
        s.split(',').map(|part| part.trim().parse::<usize>()).collect();
    vals.map_err(|_| Error::Config(format!("bad {what} list `{s}`")))
}

fn cmd_bench(
    ckpt: &Path,
    window: &str,
    channels: &str,
    repeat: usize,
    precision: Option<DType>,
) -> Result<()> {
    let (mut model, _) = load_checkpoint(ckpt)?;
    if let Some(dtype) = precision {
        model.params = model.params.cast(dtype);
    }
    let windows = parse_usize_list(window, "window")?;
    let channel_counts = parse_usize_list(channels, "channels")?;
    let rows = bench(&model, &windows, &channel_counts, repeat)?;
    print!("{}", bench_csv(&rows));
    Ok(())
}

//! Command line: `simulate`, `ingest`, `train` and `report`.
//!
//! Every command writes the effective `config.toml` into its output directory,
//! so rerunning with `--config <out>/config.toml` reproduces the outputs.

use std::fs::{self, File};
use std::path::{Component, Path, PathBuf};

use clap::{Args, Parser, Subcommand, ValueEnum};
use dds_core::{generate_driver, sbptt_train, train_ds_baseline, ModelKind, TrainData, UpdateMode};
use log::info;
use serde::Serialize;

use crate::config::{Baseline, RunConfig, DEFAULT_TRAIN_FRACTION};
use crate::dataset::{
    discover, read_dataset, write_dataset, write_json, Dataset, DatasetMeta, DatasetSource,
    GeneratorSidecar, DATASET_FORMAT,
};
use crate::error::{Error, Result};
use crate::pipeline::{self, PadScope, ParseReport};
use crate::report::{self, RunReport};

pub const INGEST_REPORT_FILE: &str = "ingest_report.json";
pub const TIDY_FILE: &str = "tidy.csv";

#[derive(Debug, Parser)]
#[command(
    name = "dds",
    version,
    about = "Dynamic discounted satisficing driver model"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Generate a synthetic driver dataset.
    Simulate(SimulateArgs),
    /// Turn a taxi-trip CSV into per-driver datasets.
    Ingest(IngestArgs),
    /// Train on one dataset or on every dataset under a directory.
    Train(TrainArgs),
    /// Merge training reports into one long-format CSV.
    Report(ReportArgs),
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum ModelArg {
    Dds,
    Ds,
    S,
}

impl From<ModelArg> for ModelKind {
    fn from(m: ModelArg) -> Self {
        match m {
            ModelArg::Dds => ModelKind::Dds,
            ModelArg::Ds => ModelKind::Ds,
            ModelArg::S => ModelKind::S,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum UpdateModeArg {
    PerDayReverse,
    FullBatch,
}

impl From<UpdateModeArg> for UpdateMode {
    fn from(m: UpdateModeArg) -> Self {
        match m {
            UpdateModeArg::PerDayReverse => UpdateMode::PerDayReverse,
            UpdateModeArg::FullBatch => UpdateMode::FullBatch,
        }
    }
}

#[derive(Debug, Clone, Copy, ValueEnum)]
pub enum BaselineArg {
    Ds,
}

#[derive(Debug, Args)]
pub struct CommonArgs {
    /// TOML run configuration; flags override its values.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Output directory.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, value_enum)]
    pub model: Option<ModelArg>,
}

#[derive(Debug, Args)]
pub struct SimulateArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    #[arg(long)]
    pub days: Option<usize>,
    #[arg(long)]
    pub width: Option<usize>,
    /// Standard deviation of both generation noises.
    #[arg(long)]
    pub noise_std: Option<f64>,
    /// Initial target of the generator.
    #[arg(long)]
    pub lambda0: Option<f64>,
    /// Initial discount of the generator.
    #[arg(long)]
    pub beta0: Option<f64>,
}

#[derive(Debug, Args)]
pub struct IngestArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Trip CSV with Taxi ID, Trip Start/End Timestamp and Trip Total columns.
    #[arg(long)]
    pub input: PathBuf,
    #[arg(long)]
    pub drivers: Option<usize>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Pad with the mean fare over all sampled drivers.
    #[arg(long)]
    pub global_mean: bool,
}

#[derive(Debug, Args)]
pub struct TrainArgs {
    #[command(flatten)]
    pub common: CommonArgs,
    /// Dataset directory, or a directory of dataset directories.
    #[arg(long)]
    pub data: PathBuf,
    /// Noise samples per update; a comma list trains one run per value.
    #[arg(long, value_delimiter = ',')]
    pub samples: Vec<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub temperature: Option<f64>,
    /// Standard deviation of both training noises.
    #[arg(long)]
    pub noise_std: Option<f64>,
    #[arg(long, value_enum)]
    pub update_mode: Option<UpdateModeArg>,
    #[arg(long)]
    pub train_fraction: Option<f64>,
    /// Also train this baseline on every dataset.
    #[arg(long, value_enum)]
    pub baseline: Option<BaselineArg>,
}

#[derive(Debug, Args)]
pub struct ReportArgs {
    /// Output directory for the merged CSV.
    #[arg(long)]
    pub out: PathBuf,
    /// `report.json` files or directories searched for them.
    #[arg(required = true)]
    pub inputs: Vec<PathBuf>,
}

fn base_config(common: &CommonArgs) -> Result<RunConfig> {
    let mut cfg = match &common.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    if let Some(model) = common.model {
        cfg.model = model.into();
    }
    Ok(cfg)
}

/// Lexically normalized absolute path, resolving symlinks on the part that exists.
fn resolved(path: &Path) -> Result<PathBuf> {
    let abs = std::path::absolute(path).map_err(|e| Error::io(path, e))?;
    let mut clean = PathBuf::new();
    for c in abs.components() {
        match c {
            Component::ParentDir => {
                clean.pop();
            }
            Component::CurDir => {}
            other => clean.push(other),
        }
    }
    let mut existing = clean.clone();
    let mut rest = Vec::new();
    while !existing.exists() {
        match existing.file_name() {
            Some(name) => rest.push(name.to_owned()),
            None => break,
        }
        existing.pop();
    }
    let mut out = existing.canonicalize().unwrap_or(existing);
    for name in rest.into_iter().rev() {
        out.push(name);
    }
    Ok(out)
}

/// Refuse outputs inside an input directory, or in the directory holding an
/// input file.
fn guard_output(out: &Path, inputs: &[&Path]) -> Result<()> {
    let out_abs = resolved(out)?;
    for input in inputs {
        let clash = if input.is_file() {
            let file = resolved(input)?;
            out_abs == file || file.parent() == Some(out_abs.as_path())
        } else {
            out_abs.starts_with(resolved(input)?)
        };
        if clash {
            return Err(Error::Config(format!(
                "output {} overlaps input {}",
                out.display(),
                input.display()
            )));
        }
    }
    Ok(())
}

fn create_out(out: &Path) -> Result<()> {
    fs::create_dir_all(out).map_err(|e| Error::io(out, e))
}

pub fn run(cli: Cli) -> Result<()> {
    match cli.command {
        Command::Simulate(args) => simulate(&args),
        Command::Ingest(args) => ingest(&args),
        Command::Train(args) => train(&args),
        Command::Report(args) => report_cmd(&args),
    }
}

pub fn simulate(args: &SimulateArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(d) = args.days {
        cfg.days = d;
    }
    if let Some(w) = args.width {
        cfg.width = w;
    }
    if let Some(s) = args.noise_std {
        cfg.sim_noise_std_eps = s;
        cfg.sim_noise_std_eta = s;
    }
    if let Some(l) = args.lambda0 {
        cfg.gen_lambda0 = l;
    }
    if let Some(b) = args.beta0 {
        cfg.gen_beta0 = b;
    }
    cfg.validate()?;
    let out = &args.common.out;
    let sim = cfg.sim_config();
    let driver = generate_driver(&sim)?;
    info!(
        "simulated {} days x {} slots, seed {}",
        driver.history.len(),
        driver.history.width(),
        sim.seed
    );
    let dataset = Dataset {
        meta: DatasetMeta {
            format: DATASET_FORMAT.into(),
            driver_id: format!("sim-{}", sim.seed),
            source: DatasetSource::Simulated,
            days: driver.history.len(),
            width: driver.history.width(),
            pad_value: None,
            split_index: None,
            dates: Vec::new(),
            config: serde_json::to_value(&sim).map_err(|e| Error::Config(e.to_string()))?,
        },
        history: driver.history,
        generator: Some(GeneratorSidecar {
            sim_config: sim,
            latent: driver.latent,
        }),
    };
    create_out(out)?;
    write_dataset(out, &dataset)?;
    cfg.save(out)
}

#[derive(Debug, Serialize)]
struct IngestReport<'a> {
    input: String,
    #[serde(flatten)]
    parse: &'a ParseReport,
    drivers_available: usize,
    drivers_sampled: Vec<DriverSummary>,
    train_fraction: f64,
    pad_scope: PadScope,
}

#[derive(Debug, Serialize)]
struct DriverSummary {
    dir: String,
    driver_id: String,
    days: usize,
    width: usize,
    trips: usize,
    split_index: Option<usize>,
}

pub fn ingest(args: &IngestArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if let Some(n) = args.drivers {
        cfg.drivers = n;
    }
    if let Some(f) = args.train_fraction {
        cfg.train_fraction = Some(f);
    }
    if args.global_mean {
        cfg.pad_scope = PadScope::Global;
    }
    cfg.validate()?;
    let out = &args.common.out;
    guard_output(out, &[&args.input])?;

    let file = File::open(&args.input).map_err(|e| Error::io(&args.input, e))?;
    let (trips, parse) = pipeline::parse_trips(file, &args.input)?;
    let available = trips
        .iter()
        .map(|t| t.taxi_id.as_str())
        .collect::<std::collections::BTreeSet<_>>()
        .len();
    let sequences = pipeline::aggregate(&trips, cfg.drivers, cfg.seed)?;
    let bundle = pipeline::pad_and_encode(&sequences, cfg.pad_scope)?;
    let fraction = cfg.train_fraction.unwrap_or(DEFAULT_TRAIN_FRACTION);
    let input_name = args
        .input
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_default();
    info!(
        "{}: kept {} of {} rows, sampled {} of {} drivers",
        args.input.display(),
        parse.rows_kept,
        parse.rows_read,
        bundle.drivers.len(),
        available
    );

    create_out(out)?;
    let mut summaries = Vec::new();
    for (i, (mut driver, seq)) in bundle.drivers.into_iter().zip(&sequences).enumerate() {
        let days = driver.history.len();
        driver.split_index = if days >= 2 {
            Some(pipeline::split_index(days, fraction)?)
        } else {
            log::warn!(
                "driver {} has a single day; no split stored",
                driver.driver_id
            );
            None
        };
        let dir_name = format!("driver-{i:02}");
        let meta = DatasetMeta {
            format: DATASET_FORMAT.into(),
            driver_id: driver.driver_id.clone(),
            source: DatasetSource::Ingested,
            days,
            width: driver.history.width(),
            pad_value: Some(driver.pad_value),
            split_index: driver.split_index,
            dates: driver.dates.iter().map(|d| d.to_string()).collect(),
            config: serde_json::json!({
                "input": input_name,
                "seed": cfg.seed,
                "drivers": cfg.drivers,
                "train_fraction": fraction,
                "pad_scope": cfg.pad_scope,
            }),
        };
        summaries.push(DriverSummary {
            dir: dir_name.clone(),
            driver_id: driver.driver_id.clone(),
            days,
            width: meta.width,
            trips: seq.fares.iter().map(Vec::len).sum(),
            split_index: driver.split_index,
        });
        write_dataset(
            &out.join(&dir_name),
            &Dataset {
                meta,
                history: driver.history,
                generator: None,
            },
        )?;
    }
    write_json(
        &out.join(INGEST_REPORT_FILE),
        &IngestReport {
            input: input_name,
            parse: &parse,
            drivers_available: available,
            drivers_sampled: summaries,
            train_fraction: fraction,
            pad_scope: cfg.pad_scope,
        },
    )?;
    cfg.save(out)
}

fn model_tag(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Dds => "dds",
        ModelKind::Ds => "ds",
        ModelKind::S => "s",
    }
}

/// Mean daily total utility over the first `days` days.
fn mean_daily_total(history: &dds_core::DriverHistory, days: usize) -> f64 {
    let sum: f64 = history.days()[..days]
        .iter()
        .map(|d| d.total_utility())
        .sum();
    sum / days as f64
}

pub fn train(args: &TrainArgs) -> Result<()> {
    let mut cfg = base_config(&args.common)?;
    if !args.samples.is_empty() {
        cfg.samples = args.samples.clone();
    }
    if let Some(e) = args.epochs {
        cfg.epochs = e;
    }
    if let Some(lr) = args.lr {
        cfg.learning_rate = lr;
    }
    if let Some(t) = args.temperature {
        cfg.temperature = t;
    }
    if let Some(s) = args.noise_std {
        cfg.noise_std_eps = s;
        cfg.noise_std_eta = s;
    }
    if let Some(m) = args.update_mode {
        cfg.update_mode = m.into();
    }
    if let Some(f) = args.train_fraction {
        cfg.train_fraction = Some(f);
    }
    if let Some(BaselineArg::Ds) = args.baseline {
        cfg.baseline = Some(Baseline::Ds);
    }
    cfg.validate()?;
    let out = &args.common.out;
    guard_output(out, &[&args.data])?;
    let dirs = discover(&args.data)?;
    create_out(out)?;

    for dir in &dirs {
        let dataset = read_dataset(dir)?;
        let name = dir
            .file_name()
            .map(|n| n.to_string_lossy().into_owned())
            .unwrap_or_else(|| dataset.meta.driver_id.clone());
        let days = dataset.history.len();
        let train_days = match (cfg.train_fraction, dataset.meta.split_index) {
            (Some(f), _) => pipeline::split_index(days, f)?,
            (None, Some(k)) => k,
            (None, None) => days,
        };
        let data = TrainData::new(dataset.history, train_days)?;
        let init_lambda0 = cfg
            .init_lambda0
            .unwrap_or_else(|| mean_daily_total(&data.history, train_days));
        let truth = dataset.generator.as_ref().map(|g| g.sim_config.generator);

        for &samples in &cfg.samples {
            let run_id = format!("{name}-{}-r{samples}", model_tag(cfg.model));
            let tc = cfg.train_config(samples, init_lambda0);
            let report = sbptt_train(&data, &tc, truth.as_ref())?;
            log_final(&run_id, &report);
            let run = RunReport::new(
                run_id.clone(),
                name.clone(),
                dataset.meta.driver_id.clone(),
                report,
            );
            report::write_run(&out.join(&run_id), &run)?;
        }
        if cfg.baseline == Some(Baseline::Ds) {
            let run_id = format!("{name}-ds-baseline");
            let tc = cfg.train_config(1, init_lambda0);
            let report = train_ds_baseline(&data, &tc)?;
            log_final(&run_id, &report);
            let run = RunReport::new(
                run_id.clone(),
                name.clone(),
                dataset.meta.driver_id.clone(),
                report,
            );
            report::write_run(&out.join(&run_id), &run)?;
        }
    }
    cfg.save(out)
}

fn log_final(run_id: &str, report: &dds_core::TrainReport) {
    if let Some(last) = report.epochs.last() {
        let test = last
            .test
            .map(|m| format!("{:.4}", m.decision_accuracy))
            .unwrap_or_else(|| "-".into());
        info!(
            "{run_id}: epoch {} train loss {:.4} acc {:.4} test acc {test}",
            last.epoch, last.train.loss, last.train.decision_accuracy
        );
    }
}

pub fn report_cmd(args: &ReportArgs) -> Result<()> {
    let inputs: Vec<&Path> = args.inputs.iter().map(PathBuf::as_path).collect();
    guard_output(&args.out, &inputs)?;
    let files = report::collect_reports(&args.inputs)?;
    let runs = files
        .iter()
        .map(|p| report::load_run(p))
        .collect::<Result<Vec<_>>>()?;
    let text = report::tidy_csv(&runs)?;
    create_out(&args.out)?;
    let path = args.out.join(TIDY_FILE);
    fs::write(&path, text).map_err(|e| Error::io(&path, e))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn output_inside_input_is_refused() {
        let dir = tempfile::tempdir().unwrap();
        let input = dir.path().join("data");
        fs::create_dir(&input).unwrap();
        assert!(guard_output(&input, &[&input]).is_err());
        assert!(guard_output(&input.join("runs"), &[&input]).is_err());
        assert!(guard_output(&input.join("x/../runs"), &[&input]).is_err());
        assert!(guard_output(&dir.path().join("runs"), &[&input]).is_ok());
        assert!(guard_output(&dir.path().join("data2"), &[&input]).is_ok());
    }

    #[test]
    fn input_file_guards_its_directory() {
        let dir = tempfile::tempdir().unwrap();
        let file = dir.path().join("trips.csv");
        fs::write(&file, "x").unwrap();
        assert!(guard_output(dir.path(), &[&file]).is_err());
        assert!(guard_output(&file, &[&file]).is_err());
        assert!(guard_output(&dir.path().join("out"), &[&file]).is_ok());
    }

    #[test]
    fn cli_parses_sample_sweep() {
        let cli = Cli::try_parse_from([
            "dds",
            "train",
            "--data",
            "d",
            "--out",
            "o",
            "--samples",
            "1,8,32",
            "--model",
            "ds",
            "--update-mode",
            "full-batch",
            "--baseline",
            "ds",
        ])
        .unwrap();
        let Command::Train(args) = cli.command else {
            panic!("expected train");
        };
        assert_eq!(args.samples, vec![1, 8, 32]);
        assert!(matches!(args.common.model, Some(ModelArg::Ds)));
        assert!(matches!(args.update_mode, Some(UpdateModeArg::FullBatch)));
    }
}

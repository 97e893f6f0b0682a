mod config;
mod manifest;

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use protoad_core::sweep::{write_sweep_csv, DEFAULT_K_GRID, DEFAULT_M_GRID};
use protoad_core::{
    auc, explain, export_latent, fit_detector, generate_synthetic, load_csv, model_windows,
    run_sweep, score_series, ProtoADModel, ScoreMode, SyntheticConfig,
};
use serde::Serialize;

use config::{resolve, CommonArgs, CsvArgs, ModelArgs};
use manifest::{write_json, Run};

#[derive(Debug, Parser)]
#[command(
    name = "protoad",
    version,
    about = "Prototype-based LSTM autoencoder anomaly detection"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Write the noisy sine-wave benchmark as train.csv and test.csv.
    Generate(GenerateArgs),
    /// Train a detector on a regular series; writes checkpoint.json.
    Train(TrainArgs),
    /// Score the windows of a series with a trained checkpoint.
    Score(ScoreArgs),
    /// Compute AUC from a scores CSV.
    Eval(EvalArgs),
    /// Map prototypes to training windows and assign test windows.
    Explain(ExplainArgs),
    /// Train and evaluate over a grid of latent sizes and prototype counts.
    Sweep(SweepArgs),
}

#[derive(Debug, Args)]
struct GenerateArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[arg(long, default_value_t = 20_000)]
    total_length: usize,
    #[arg(long, default_value_t = 100)]
    period: usize,
    #[arg(long, default_value_t = 0.1)]
    noise_max: f64,
    #[arg(long, default_value_t = 100)]
    anomaly_gap: usize,
    #[arg(long, default_value_t = 0.0)]
    alpha_min: f64,
    #[arg(long, default_value_t = 1.0)]
    alpha_max: f64,
}

#[derive(Debug, Args)]
struct TrainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    csv: CsvArgs,
}

#[derive(Debug, Args)]
struct ScoreArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    csv: CsvArgs,
    #[arg(long)]
    checkpoint: PathBuf,
}

#[derive(Debug, Args)]
struct EvalArgs {
    #[command(flatten)]
    common: CommonArgs,
    /// Orientation of the scores; paper-density scores are low for anomalies.
    /// Defaults to the checkpoint's mode, else mahalanobis.
    #[arg(long)]
    score: Option<ScoreMode>,
    #[arg(long)]
    checkpoint: Option<PathBuf>,
}

#[derive(Debug, Args)]
struct ExplainArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    csv: CsvArgs,
    #[arg(long)]
    checkpoint: PathBuf,
    /// Training series the prototypes are projected onto.
    #[arg(long)]
    train: PathBuf,
    /// Also write one SVG per prototype (univariate series only).
    #[arg(long)]
    svg: bool,
    /// Assigned test windows drawn per prototype.
    #[arg(long, default_value_t = 3)]
    top: usize,
}

#[derive(Debug, Args)]
struct SweepArgs {
    #[command(flatten)]
    common: CommonArgs,
    #[command(flatten)]
    model: ModelArgs,
    #[command(flatten)]
    csv: CsvArgs,
    /// Test series used for the AUC of each cell.
    #[arg(long)]
    test: PathBuf,
    #[arg(long, value_delimiter = ',')]
    m_grid: Vec<usize>,
    #[arg(long, value_delimiter = ',')]
    k_grid: Vec<usize>,
}

fn main() {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Generate(args) => cmd_generate(args),
        Command::Train(args) => cmd_train(args),
        Command::Score(args) => cmd_score(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Explain(args) => cmd_explain(args),
        Command::Sweep(args) => cmd_sweep(args),
    };
    if let Err(err) = outcome {
        eprintln!("error: {err:#}");
        std::process::exit(1);
    }
}

fn to_value(value: &impl Serialize) -> Result<serde_json::Value> {
    Ok(serde_json::to_value(value)?)
}

fn existing(path: &Path) -> Result<&Path> {
    if !path.is_file() {
        bail!("input file {} does not exist", path.display());
    }
    Ok(path)
}

fn cmd_generate(args: GenerateArgs) -> Result<()> {
    let cfg = SyntheticConfig {
        total_length: args.total_length,
        period: args.period,
        noise_max: args.noise_max,
        anomaly_gap: args.anomaly_gap,
        alpha_min: args.alpha_min,
        alpha_max: args.alpha_max,
        seed: args.common.seed.unwrap_or(0),
    };
    let mut run = Run::start("generate", &args.common.output_dir)?;
    let (train, test) = generate_synthetic(&cfg)?;
    run.stage("generate");
    train.write_csv(run.output("train.csv"))?;
    test.write_csv(run.output("test.csv"))?;
    run.stage("write");
    println!(
        "wrote {} train rows and {} test rows ({} anomalies)",
        train.len(),
        test.len(),
        test.anomaly_count()
    );
    run.finish(cfg.seed, to_value(&cfg)?)
}

fn cmd_train(args: TrainArgs) -> Result<()> {
    let input = args.common.input()?;
    let cfg = resolve(&args.common, &args.model)?;
    let mut run = Run::start("train", &args.common.output_dir)?;
    run.input(input)?;
    if let Some(path) = &args.common.config {
        run.input(path)?;
    }
    let series = load_csv(input, &args.csv.options_for(input)?)?;
    run.stage("load");
    let (model, mut report) = fit_detector(&series, &cfg)?;
    run.stage("train");
    model.save_checkpoint(run.output("checkpoint.json"))?;
    report.checkpoint = Some("checkpoint.json".into());
    write_json(&run.timed_output("train_report.json"), &report)?;
    run.stage("write");
    let last = report
        .epochs
        .last()
        .map(|e| e.loss.total)
        .unwrap_or(f64::NAN);
    println!(
        "{}: {} epochs, final loss {last:.6}, {:.3}s/epoch",
        report.variant,
        report.epochs.len(),
        report.mean_epoch_seconds()
    );
    run.finish(cfg.seed, to_value(&cfg)?)
}

fn load_model(path: &Path) -> Result<ProtoADModel> {
    ProtoADModel::load_checkpoint(existing(path)?)
        .with_context(|| format!("loading checkpoint {}", path.display()))
}

fn cmd_score(args: ScoreArgs) -> Result<()> {
    let input = args.common.input()?;
    let model = load_model(&args.checkpoint)?;
    if args.model.architecture_given() {
        model.ensure_compatible(&resolve(&args.common, &args.model)?)?;
    }
    let mode = args.model.score.unwrap_or(model.config.score_mode);
    let mut run = Run::start("score", &args.common.output_dir)?;
    run.input(input)?;
    run.input(&args.checkpoint)?;
    let series = load_csv(input, &args.csv.options_for(input)?)?;
    run.stage("load");
    let scores = score_series(&model, &series, mode)?;
    run.stage("score");
    scores.write_csv(run.output("scores.csv"))?;
    run.stage("write");
    println!("scored {} windows", scores.window_scores.len());
    let mut config = model.config.clone();
    config.score_mode = mode;
    run.finish(model.config.seed, to_value(&config)?)
}

#[derive(Debug, Serialize)]
struct Metrics {
    auc: f64,
    windows: usize,
    anomalous_windows: usize,
    score_mode: ScoreMode,
    config: Option<serde_json::Value>,
    seconds: f64,
}

fn read_scores(path: &Path) -> Result<(Vec<f64>, Vec<u8>)> {
    let mut reader =
        csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))?;
    let headers = reader.headers()?.clone();
    let column = |name: &str| {
        headers
            .iter()
            .position(|h| h.trim() == name)
            .with_context(|| format!("{} has no `{name}` column", path.display()))
    };
    let (score_col, label_col) = (column("score")?, column("label")?);
    let mut scores = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        let score: f64 = record[score_col]
            .trim()
            .parse()
            .with_context(|| format!("row {}: bad score", row + 1))?;
        let label: u8 = record[label_col]
            .trim()
            .parse()
            .with_context(|| format!("row {}: bad label", row + 1))?;
        scores.push(score);
        labels.push(label);
    }
    Ok((scores, labels))
}

fn cmd_eval(args: EvalArgs) -> Result<()> {
    let start = Instant::now();
    let input = args.common.input()?;
    let model = args.checkpoint.as_deref().map(load_model).transpose()?;
    let mode = args
        .score
        .or_else(|| model.as_ref().map(|m| m.config.score_mode))
        .unwrap_or_default();
    let mut run = Run::start("eval", &args.common.output_dir)?;
    run.input(input)?;
    if let Some(path) = &args.checkpoint {
        run.input(path)?;
    }
    let (mut scores, labels) = read_scores(input)?;
    let dim = model.as_ref().map_or(1, |m| m.dim());
    if !mode.higher_is_anomalous(dim) {
        scores.iter_mut().for_each(|s| *s = -*s);
    }
    let value = auc(&scores, &labels).context("cannot compute AUC")?;
    run.stage("eval");
    let config = model.as_ref().map(|m| to_value(&m.config)).transpose()?;
    let metrics = Metrics {
        auc: value,
        windows: labels.len(),
        anomalous_windows: labels.iter().filter(|&&l| l == 1).count(),
        score_mode: mode,
        config: config.clone(),
        seconds: start.elapsed().as_secs_f64(),
    };
    write_json(&run.timed_output("metrics.json"), &metrics)?;
    println!("AUC {value:.6}");
    let seed = args
        .common
        .seed
        .or(model.as_ref().map(|m| m.config.seed))
        .unwrap_or(0);
    run.finish(seed, config.unwrap_or(serde_json::Value::Null))
}

fn cmd_explain(args: ExplainArgs) -> Result<()> {
    let input = args.common.input()?;
    let train_path = existing(&args.train)?;
    let model = load_model(&args.checkpoint)?;
    let mut run = Run::start("explain", &args.common.output_dir)?;
    run.input(input)?;
    run.input(train_path)?;
    run.input(&args.checkpoint)?;
    let train = model_windows(
        &model,
        &load_csv(train_path, &args.csv.options_for(train_path)?)?,
    )?;
    let test = model_windows(&model, &load_csv(input, &args.csv.options_for(input)?)?)?;
    run.stage("load");
    let report = explain(&model, &train, &test)?;
    run.stage("explain");
    report.write_json(run.output("explanation.json"))?;
    report.write_projection_csv(run.output("prototype_windows.csv"))?;
    export_latent(&model, &test, run.output("latent.csv"))?;
    let prototypes = run.output("prototypes.csv");
    run.output("prototypes.json");
    model.prototypes.export(&prototypes, model.config.seed)?;
    if args.svg {
        for j in 0..report.projections.len() {
            let svg = report.prototype_svg(&model, &test, j, args.top)?;
            let path = run.output(&format!("prototype_{j}.svg"));
            std::fs::write(&path, svg).with_context(|| format!("writing {}", path.display()))?;
        }
    }
    run.stage("write");
    println!(
        "explained {} prototypes over {} test windows",
        report.projections.len(),
        report.assignments.len()
    );
    run.finish(model.config.seed, to_value(&model.config)?)
}

fn cmd_sweep(args: SweepArgs) -> Result<()> {
    let input = args.common.input()?;
    let test_path = existing(&args.test)?;
    let cfg = resolve(&args.common, &args.model)?;
    let ms = if args.m_grid.is_empty() {
        DEFAULT_M_GRID.to_vec()
    } else {
        args.m_grid.clone()
    };
    let ks = if args.k_grid.is_empty() {
        DEFAULT_K_GRID.to_vec()
    } else {
        args.k_grid.clone()
    };
    let mut run = Run::start("sweep", &args.common.output_dir)?;
    run.input(input)?;
    run.input(test_path)?;
    let train = load_csv(input, &args.csv.options_for(input)?)?;
    let test = load_csv(test_path, &args.csv.options_for(test_path)?)?;
    run.stage("load");
    let cells = run_sweep(&train, &test, &cfg, &ms, &ks)?;
    run.stage("sweep");
    write_sweep_csv(&cells, run.timed_output("sweep.csv"))?;
    for cell in &cells {
        println!(
            "m={} k={} auc={:.4} {:.3}s/epoch",
            cell.m, cell.k, cell.auc, cell.seconds
        );
    }
    run.finish(
        cfg.seed,
        serde_json::json!({ "base": to_value(&cfg)?, "m_grid": ms, "k_grid": ks }),
    )
}

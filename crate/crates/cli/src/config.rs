use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::Args;
use protoad_core::{CsvOptions, DecoderOrder, ScoreMode, TrainConfig};

/// Flags shared by every subcommand.
#[derive(Debug, Clone, Args)]
pub struct CommonArgs {
    /// Primary input file.
    #[arg(long)]
    pub input: Option<PathBuf>,
    /// Directory receiving all outputs (created if missing).
    #[arg(long, default_value = ".")]
    pub output_dir: PathBuf,
    #[arg(long)]
    pub seed: Option<u64>,
    /// JSON file with training configuration; flags override it.
    #[arg(long)]
    pub config: Option<PathBuf>,
}

impl CommonArgs {
    pub fn input(&self) -> Result<&Path> {
        let path = self.input.as_deref().context("--input is required")?;
        if !path.is_file() {
            bail!("input file {} does not exist", path.display());
        }
        Ok(path)
    }
}

/// Model and training flags. Unset flags fall back to the config file,
/// then to built-in defaults.
#[derive(Debug, Clone, Default, Args)]
pub struct ModelArgs {
    #[arg(long)]
    pub k: Option<usize>,
    #[arg(long)]
    pub m: Option<usize>,
    #[arg(long)]
    pub window_length: Option<usize>,
    #[arg(long)]
    pub stride: Option<usize>,
    #[arg(long)]
    pub epochs: Option<usize>,
    #[arg(long)]
    pub batch_size: Option<usize>,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub dropout: Option<f64>,
    #[arg(long)]
    pub lambda_e: Option<f64>,
    #[arg(long)]
    pub lambda_d: Option<f64>,
    #[arg(long)]
    pub lambda_r: Option<f64>,
    #[arg(long)]
    pub d_min: Option<f64>,
    #[arg(long)]
    pub error_fit_fraction: Option<f64>,
    /// forward | reversed
    #[arg(long)]
    pub decoder_order: Option<DecoderOrder>,
    /// mahalanobis | paper-density
    #[arg(long)]
    pub score: Option<ScoreMode>,
    /// Train on raw values instead of z-scored ones.
    #[arg(long)]
    pub no_normalize: bool,
    /// Stop the representation-loss gradient at the embeddings.
    #[arg(long)]
    pub stop_representation_gradient: bool,
}

impl ModelArgs {
    /// Whether any architecture flag was given explicitly.
    pub fn architecture_given(&self) -> bool {
        self.k.is_some() || self.m.is_some() || self.window_length.is_some()
    }
}

/// Defaults, then the JSON config file, then explicit flags.
pub fn resolve(common: &CommonArgs, flags: &ModelArgs) -> Result<TrainConfig> {
    let mut cfg = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            serde_json::from_str(&text)
                .with_context(|| format!("parsing config {}", path.display()))?
        }
        None => TrainConfig::default(),
    };
    macro_rules! overlay {
        ($($field:ident),*) => { $( if let Some(v) = flags.$field { cfg.$field = v; } )* };
    }
    overlay!(
        k,
        m,
        window_length,
        epochs,
        batch_size,
        lr,
        dropout,
        lambda_e,
        lambda_d,
        lambda_r,
        d_min,
        error_fit_fraction,
        decoder_order
    );
    if let Some(stride) = flags.stride {
        cfg.stride = Some(stride);
    }
    if let Some(mode) = flags.score {
        cfg.score_mode = mode;
    }
    if flags.no_normalize {
        cfg.normalize = false;
    }
    if flags.stop_representation_gradient {
        cfg.stop_representation_gradient = true;
    }
    if let Some(seed) = common.seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

/// Column options for a series CSV. Without an explicit label column, a
/// column named `label` is used when present.
#[derive(Debug, Clone, Default, Args)]
pub struct CsvArgs {
    #[arg(long)]
    pub label_column: Option<String>,
    /// Columns to skip, e.g. timestamps.
    #[arg(long, value_delimiter = ',')]
    pub ignore_columns: Vec<String>,
}

impl CsvArgs {
    pub fn options_for(&self, path: &Path) -> Result<CsvOptions> {
        let label_column = match &self.label_column {
            Some(name) => Some(name.clone()),
            None => {
                let mut reader = csv_header(path)?;
                let has_label = reader.headers()?.iter().any(|h| h.trim() == "label");
                has_label.then(|| "label".to_string())
            }
        };
        Ok(CsvOptions {
            label_column,
            ignore_columns: self.ignore_columns.clone(),
        })
    }
}

fn csv_header(path: &Path) -> Result<csv::Reader<std::fs::File>> {
    csv::Reader::from_path(path).with_context(|| format!("opening {}", path.display()))
}

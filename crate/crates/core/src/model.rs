//! The trained detector and its versioned JSON checkpoint.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::{Normalizer, SeriesDataset};
use crate::error::{Error, Result};
use crate::nn::{AutoencoderParams, GATE_ORDER};
use crate::prototype::PrototypeLayer;
use crate::rng::{stream_rng, Stream};
use crate::scoring::ErrorDistribution;
use crate::trainer::TrainConfig;

pub const CHECKPOINT_FORMAT: &str = "protoad-checkpoint";
pub const CHECKPOINT_VERSION: u32 = 1;

/// Autoencoder, prototypes, preprocessing and fitted error model.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProtoADModel {
    pub config: TrainConfig,
    pub params: AutoencoderParams,
    pub prototypes: PrototypeLayer,
    pub normalizer: Option<Normalizer>,
    pub error_distribution: Option<ErrorDistribution>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    gate_order: String,
    seed: u64,
    model: ProtoADModel,
}

impl ProtoADModel {
    /// Freshly initialized model for `dim`-dimensional input. Autoencoder
    /// weights and prototypes come from separate seeded streams.
    pub fn initialize(config: &TrainConfig, dim: usize) -> Result<Self> {
        config.validate()?;
        if dim == 0 {
            return Err(Error::InvalidArgument("input dimension must be positive".into()));
        }
        let params = AutoencoderParams::init(dim, config.m, &mut stream_rng(config.seed, Stream::Init));
        let prototypes = PrototypeLayer::init(
            config.k,
            config.m,
            config.d_min,
            &mut stream_rng(config.seed, Stream::PrototypeInit),
        );
        Ok(Self {
            config: config.clone(),
            params,
            prototypes,
            normalizer: None,
            error_distribution: None,
        })
    }

    pub fn dim(&self) -> usize {
        self.params.dim()
    }

    /// `"EncDecAD-equivalent"` without prototypes, `"ProtoAD"` otherwise.
    pub fn variant(&self) -> &'static str {
        variant_name(self.config.k)
    }

    /// Latent embedding of one window (no dropout).
    pub fn embed(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.params.encode(window)
    }

    /// Teacher-forced reconstruction of one window (no dropout).
    pub fn reconstruct(&self, window: &[f64]) -> Result<Vec<f64>> {
        let h = self.params.encode(window)?;
        self.params.decode(&h, window, self.config.decoder_order)
    }

    /// Applies the stored normalizer, if any.
    pub fn preprocess(&self, data: &SeriesDataset) -> Result<SeriesDataset> {
        if data.dim != self.dim() {
            return Err(Error::shape(format!("{}-dimensional series", self.dim()), data.dim));
        }
        match &self.normalizer {
            Some(n) => n.apply(data),
            None => Ok(data.clone()),
        }
    }

    fn check(&self) -> Result<()> {
        self.params.check()?;
        self.prototypes.check()?;
        let (d, m) = (self.dim(), self.params.hidden());
        if self.prototypes.m != m || self.config.m != m || self.config.k != self.prototypes.k {
            return Err(Error::Checkpoint(format!(
                "inconsistent sizes: config k={} m={}, prototypes {}x{}, hidden {m}",
                self.config.k, self.config.m, self.prototypes.k, self.prototypes.m
            )));
        }
        if let Some(n) = &self.normalizer {
            if n.mean.len() != d || n.std.len() != d {
                return Err(Error::Checkpoint("normalizer dimension mismatch".into()));
            }
        }
        if let Some(e) = &self.error_distribution {
            if e.mean.len() != d || e.covariance.len() != d * d || e.precision.len() != d * d {
                return Err(Error::Checkpoint("error distribution dimension mismatch".into()));
            }
        }
        Ok(())
    }

    /// Fails unless this model has the architecture `config` asks for.
    pub fn ensure_compatible(&self, config: &TrainConfig) -> Result<()> {
        let ours = &self.config;
        let mut diffs = Vec::new();
        if ours.k != config.k {
            diffs.push(format!("k: checkpoint {} vs requested {}", ours.k, config.k));
        }
        if ours.m != config.m {
            diffs.push(format!("m: checkpoint {} vs requested {}", ours.m, config.m));
        }
        if ours.window_length != config.window_length {
            diffs.push(format!(
                "window length: checkpoint {} vs requested {}",
                ours.window_length, config.window_length
            ));
        }
        if diffs.is_empty() {
            Ok(())
        } else {
            Err(Error::Incompatible(diffs.join("; ")))
        }
    }

    /// Writes the checkpoint; the file appears only once fully written.
    pub fn save_checkpoint(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let file = CheckpointFile {
            format: CHECKPOINT_FORMAT.into(),
            version: CHECKPOINT_VERSION,
            gate_order: GATE_ORDER.into(),
            seed: self.config.seed,
            model: self.clone(),
        };
        let text = serde_json::to_string_pretty(&file)?;
        let tmp = path.with_extension("json.partial");
        std::fs::write(&tmp, text).map_err(|e| Error::io(&tmp, e))?;
        std::fs::rename(&tmp, path).map_err(|e| Error::io(path, e))
    }

    pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let value: serde_json::Value = serde_json::from_str(&text)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if value.get("format").and_then(|v| v.as_str()) != Some(CHECKPOINT_FORMAT) {
            return Err(Error::Checkpoint(format!("{} is not a protoad checkpoint", path.display())));
        }
        let version = value
            .get("version")
            .and_then(|v| v.as_u64())
            .ok_or_else(|| Error::Checkpoint("missing version".into()))? as u32;
        if version != CHECKPOINT_VERSION {
            return Err(Error::VersionMismatch {
                found: version,
                expected: CHECKPOINT_VERSION,
            });
        }
        let file: CheckpointFile = serde_json::from_value(value)
            .map_err(|e| Error::Checkpoint(format!("{}: {e}", path.display())))?;
        if file.gate_order != GATE_ORDER {
            return Err(Error::Checkpoint(format!(
                "gate order `{}` differs from `{GATE_ORDER}`",
                file.gate_order
            )));
        }
        file.model.check()?;
        Ok(file.model)
    }
}

pub(crate) fn variant_name(k: usize) -> &'static str {
    if k == 0 {
        "EncDecAD-equivalent"
    } else {
        "ProtoAD"
    }
}

//! Composite-objective training.
//!
//! `L = lambda_e * L_e + lambda_d * L_d + lambda_r * L_r`, where `L_e` is the
//! mean over batch windows of the summed absolute reconstruction error, and
//! the prototype terms use the batch embeddings.

use std::time::Instant;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::{variant_name, ProtoADModel};
use crate::nn::{dropout_mask, AdamConfig, AdamState, AutoencoderParams, DecoderOrder, Mode, Upstream};
use crate::rng::{stream_rng, Stream};
use crate::scoring::{ErrorDistribution, ScoreMode};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub lambda_e: f64,
    pub lambda_d: f64,
    pub lambda_r: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub lr: f64,
    pub dropout: f64,
    /// Trailing fraction of training windows held out to fit the error
    /// distribution.
    pub error_fit_fraction: f64,
    pub seed: u64,
    /// Number of prototypes; 0 disables the prototype layer.
    pub k: usize,
    /// Latent (hidden) size.
    pub m: usize,
    pub window_length: usize,
    /// Defaults to `window_length` (non-overlapping windows).
    pub stride: Option<usize>,
    pub decoder_order: DecoderOrder,
    pub d_min: f64,
    /// Block the representation-loss gradient from reaching the encoder.
    pub stop_representation_gradient: bool,
    /// Z-score inputs with training statistics.
    pub normalize: bool,
    pub score_mode: ScoreMode,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lambda_e: 0.025,
            lambda_d: 0.2,
            lambda_r: 0.5,
            epochs: 100,
            batch_size: 20,
            lr: 1e-4,
            dropout: 0.2,
            error_fit_fraction: 0.25,
            seed: 0,
            k: 10,
            m: 64,
            window_length: 50,
            stride: None,
            decoder_order: DecoderOrder::Reversed,
            d_min: 1.0,
            stop_representation_gradient: false,
            normalize: true,
            score_mode: ScoreMode::Mahalanobis,
        }
    }
}

impl TrainConfig {
    pub fn stride(&self) -> usize {
        self.stride.unwrap_or(self.window_length)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: &str| Err(Error::InvalidArgument(msg.into()));
        for (name, v) in [("lambda_e", self.lambda_e), ("lambda_d", self.lambda_d), ("lambda_r", self.lambda_r)] {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::InvalidArgument(format!("{name} must be finite and non-negative")));
            }
        }
        if self.batch_size == 0 {
            return bad("batch size must be positive");
        }
        if !(self.lr > 0.0 && self.lr.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return bad("dropout rate must lie in [0, 1)");
        }
        if !(self.error_fit_fraction > 0.0 && self.error_fit_fraction < 1.0) {
            return bad("error-fit fraction must lie in (0, 1)");
        }
        if self.m == 0 || self.window_length == 0 || self.stride() == 0 {
            return bad("m, window length and stride must be positive");
        }
        if !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return bad("d_min must be positive");
        }
        Ok(())
    }

    fn adam(&self) -> AdamConfig {
        AdamConfig {
            lr: self.lr,
            ..AdamConfig::default()
        }
    }
}

/// Objective value and its weighted components' raw values.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct LossBreakdown {
    pub total: f64,
    pub reconstruction: f64,
    pub diversity: f64,
    pub representation: f64,
}

impl LossBreakdown {
    pub fn is_finite_non_negative(&self) -> bool {
        [self.total, self.reconstruction, self.diversity, self.representation]
            .iter()
            .all(|v| v.is_finite() && *v >= 0.0)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    #[serde(flatten)]
    pub loss: LossBreakdown,
    pub seconds: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainReport {
    pub variant: String,
    pub gradient_windows: usize,
    pub error_fit_windows: usize,
    pub epochs: Vec<EpochRecord>,
    pub checkpoint: Option<String>,
}

impl TrainReport {
    pub fn mean_epoch_seconds(&self) -> f64 {
        if self.epochs.is_empty() {
            return 0.0;
        }
        self.epochs.iter().map(|e| e.seconds).sum::<f64>() / self.epochs.len() as f64
    }

    pub fn reconstruction_trajectory(&self) -> Vec<f64> {
        self.epochs.iter().map(|e| e.loss.reconstruction).collect()
    }
}

/// Dropout masks for one batch: decoder-input masks (`L x d` per window) and
/// masks on the embeddings fed to the prototype losses (`m` per window).
#[derive(Debug, Clone, Default)]
pub struct BatchDropout {
    pub decoder_inputs: Vec<Vec<f64>>,
    pub embeddings: Vec<Vec<f64>>,
}

/// Gradients of the objective for every trainable parameter.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub autoencoder: AutoencoderParams,
    /// Same layout as the prototype values.
    pub prototypes: Vec<f64>,
}

/// Objective on `batch` without dropout.
pub fn total_loss(model: &ProtoADModel, batch: &[&[f64]]) -> Result<LossBreakdown> {
    Ok(objective(model, batch, None, false)?.0)
}

/// Objective and exact gradients on `batch`, optionally under fixed dropout
/// masks.
pub fn objective_and_gradients(
    model: &ProtoADModel,
    batch: &[&[f64]],
    dropout: Option<&BatchDropout>,
) -> Result<(LossBreakdown, Gradients)> {
    let (loss, grads) = objective(model, batch, dropout, true)?;
    Ok((loss, grads.expect("gradients requested")))
}

fn objective(
    model: &ProtoADModel,
    batch: &[&[f64]],
    dropout: Option<&BatchDropout>,
    want_grads: bool,
) -> Result<(LossBreakdown, Option<Gradients>)> {
    if batch.is_empty() {
        return Err(Error::InvalidArgument("empty batch".into()));
    }
    let cfg = &model.config;
    let params = &model.params;
    let protos = &model.prototypes;
    let n = batch.len() as f64;

    let mut passes = Vec::with_capacity(batch.len());
    for (i, window) in batch.iter().enumerate() {
        let mask = dropout.map(|d| d.decoder_inputs[i].as_slice());
        passes.push(params.forward(window, cfg.decoder_order, mask)?);
    }

    let mut reconstruction = 0.0;
    for (window, pass) in batch.iter().zip(&passes) {
        reconstruction += window
            .iter()
            .zip(&pass.reconstruction)
            .map(|(x, r)| (x - r).abs())
            .sum::<f64>();
    }
    reconstruction /= n;

    let use_prototypes = protos.k > 0;
    let hidden: Vec<Vec<f64>> = if use_prototypes {
        passes
            .iter()
            .enumerate()
            .map(|(i, p)| match dropout {
                Some(d) => p.embedding.iter().zip(&d.embeddings[i]).map(|(h, k)| h * k).collect(),
                None => p.embedding.clone(),
            })
            .collect()
    } else {
        Vec::new()
    };
    let diversity = protos.diversity_loss();
    let representation = protos.representation_loss(&hidden);
    let loss = LossBreakdown {
        total: cfg.lambda_e * reconstruction + cfg.lambda_d * diversity + cfg.lambda_r * representation,
        reconstruction,
        diversity,
        representation,
    };
    if !want_grads {
        return Ok((loss, None));
    }

    let proto_grads = (use_prototypes && (cfg.lambda_d != 0.0 || cfg.lambda_r != 0.0))
        .then(|| protos.loss_gradients(&hidden, cfg.lambda_d, cfg.lambda_r));
    let scale = cfg.lambda_e / n;
    let mut grads = AutoencoderParams::zeros(params.dim(), params.hidden());
    let mut d_recon = Vec::new();
    for (i, (window, pass)) in batch.iter().zip(&passes).enumerate() {
        d_recon.clear();
        d_recon.extend(window.iter().zip(&pass.reconstruction).map(|(x, r)| {
            let diff = r - x;
            if diff > 0.0 {
                scale
            } else if diff < 0.0 {
                -scale
            } else {
                0.0
            }
        }));
        let d_embedding: Option<Vec<f64>> = match &proto_grads {
            Some(g) if !cfg.stop_representation_gradient && cfg.lambda_r != 0.0 => Some(match dropout {
                Some(d) => g.hidden[i].iter().zip(&d.embeddings[i]).map(|(g, k)| g * k).collect(),
                None => g.hidden[i].clone(),
            }),
            _ => None,
        };
        params.backward_into(
            pass,
            &Upstream {
                reconstruction: &d_recon,
                embedding: d_embedding.as_deref(),
            },
            &mut grads,
        )?;
    }
    let prototypes = proto_grads.map_or_else(|| vec![0.0; protos.values.len()], |g| g.prototypes);
    Ok((
        loss,
        Some(Gradients {
            autoencoder: grads,
            prototypes,
        }),
    ))
}

/// Number of trailing windows reserved for fitting the error distribution.
pub fn error_fit_count(n: usize, fraction: f64) -> usize {
    ((n as f64 * fraction).round() as usize).clamp(1, n.saturating_sub(1))
}

/// Trains a fresh model on regular windows.
///
/// The trailing `error_fit_fraction` of `windows` never contributes
/// gradients; after the last epoch their reconstruction errors fit the
/// model's error distribution.
pub fn train(windows: &WindowSet, cfg: &TrainConfig) -> Result<(ProtoADModel, TrainReport)> {
    cfg.validate()?;
    if windows.len() < 2 {
        return Err(Error::InvalidArgument(format!(
            "need at least two training windows, got {}",
            windows.len()
        )));
    }
    if let Some(i) = windows.labels.iter().position(|&l| l != 0) {
        return Err(Error::InvalidArgument(format!(
            "training window {i} (origin {}) contains anomalous points",
            windows.origins[i]
        )));
    }
    if windows.length != cfg.window_length {
        return Err(Error::InvalidArgument(format!(
            "windows have length {}, config asks for {}",
            windows.length, cfg.window_length
        )));
    }

    let mut model = ProtoADModel::initialize(cfg, windows.dim)?;
    let n_fit = error_fit_count(windows.len(), cfg.error_fit_fraction);
    let n_grad = windows.len() - n_fit;
    let (gradient_windows, fit_windows) = windows.windows.split_at(n_grad);

    let mut block_lens: Vec<usize> = model.params.blocks().iter().map(|b| b.len()).collect();
    block_lens.push(model.prototypes.values.len());
    let mut adam = AdamState::new(cfg.adam(), &block_lens);

    let mut shuffle_rng = stream_rng(cfg.seed, Stream::Shuffle);
    let mut dropout_rng = stream_rng(cfg.seed, Stream::Dropout);
    let mut proto_dropout_rng = stream_rng(cfg.seed, Stream::PrototypeDropout);
    let window_values = windows.length * windows.dim;
    let m = cfg.m;

    let mut order: Vec<usize> = (0..n_grad).collect();
    let mut epochs = Vec::with_capacity(cfg.epochs);
    for epoch in 1..=cfg.epochs {
        let start = Instant::now();
        order.shuffle(&mut shuffle_rng);
        let mut sums = LossBreakdown::default();
        for chunk in order.chunks(cfg.batch_size) {
            let batch: Vec<&[f64]> = chunk.iter().map(|&i| gradient_windows[i].as_slice()).collect();
            let masks = BatchDropout {
                decoder_inputs: (0..batch.len())
                    .map(|_| dropout_mask(window_values, cfg.dropout, Mode::Train, &mut dropout_rng))
                    .collect(),
                embeddings: if cfg.k > 0 {
                    (0..batch.len())
                        .map(|_| dropout_mask(m, cfg.dropout, Mode::Train, &mut proto_dropout_rng))
                        .collect()
                } else {
                    Vec::new()
                },
            };
            let (loss, grads) = objective_and_gradients(&model, &batch, Some(&masks))?;
            let w = batch.len() as f64;
            sums.total += loss.total * w;
            sums.reconstruction += loss.reconstruction * w;
            sums.diversity += loss.diversity * w;
            sums.representation += loss.representation * w;

            let mut params: Vec<&mut [f64]> = model.params.blocks_mut().into_iter().collect();
            params.push(&mut model.prototypes.values);
            let mut grad_blocks: Vec<&[f64]> = grads.autoencoder.blocks().into_iter().collect();
            grad_blocks.push(&grads.prototypes);
            adam.update(&mut params, &grad_blocks);
        }
        let n = n_grad as f64;
        let loss = LossBreakdown {
            total: sums.total / n,
            reconstruction: sums.reconstruction / n,
            diversity: sums.diversity / n,
            representation: sums.representation / n,
        };
        if !loss.is_finite_non_negative() {
            return Err(Error::InvalidArgument(format!("epoch {epoch}: non-finite loss {loss:?}")));
        }
        epochs.push(EpochRecord {
            epoch,
            loss,
            seconds: start.elapsed().as_secs_f64(),
        });
    }

    let mut errors = Vec::with_capacity(n_fit * windows.length);
    for window in fit_windows {
        let recon = model.reconstruct(window)?;
        for (x, r) in window.chunks_exact(windows.dim).zip(recon.chunks_exact(windows.dim)) {
            errors.push(x.iter().zip(r).map(|(x, r)| (x - r).abs()).collect());
        }
    }
    model.error_distribution = Some(ErrorDistribution::fit(&errors)?);

    let report = TrainReport {
        variant: variant_name(cfg.k).into(),
        gradient_windows: n_grad,
        error_fit_windows: n_fit,
        epochs,
        checkpoint: None,
    };
    Ok((model, report))
}

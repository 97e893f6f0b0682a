//! LSTM autoencoder anomaly detection for time series with a prototype
//! layer in the latent space.
//!
//! Windows of a regular series are encoded by an LSTM; a teacher-forced
//! LSTM decoder reconstructs them. Point anomaly scores are Mahalanobis
//! distances of reconstruction errors under a Gaussian fitted on held-out
//! regular windows, and a window scores as its worst point. `k` prototypes
//! trained jointly with the autoencoder summarize the regular embeddings
//! and are explained through their nearest real training windows.

pub mod data;
pub mod error;
pub mod explain;
pub mod model;
pub mod nn;
pub mod pipeline;
pub mod prototype;
pub mod rng;
pub mod scoring;
pub mod sweep;
pub mod trainer;

pub use data::{generate_synthetic, load_csv, make_windows, CsvOptions, Normalizer, SeriesDataset, SyntheticConfig, WindowSet};
pub use error::{Error, Result};
pub use explain::{assign_windows, explain, export_latent, project_prototypes, ExplanationReport};
pub use model::ProtoADModel;
pub use nn::DecoderOrder;
pub use pipeline::{fit_detector, model_windows, score_series};
pub use prototype::PrototypeLayer;
pub use scoring::{auc, score_windows, ErrorDistribution, ScoreMode, ScoreSeries};
pub use sweep::{run_sweep, SweepCell};
pub use trainer::{objective_and_gradients, total_loss, train, LossBreakdown, TrainConfig, TrainReport};

//! End-to-end helpers: preprocess a series, window it with the model's
//! geometry, train, and score.

use crate::data::{make_windows, Normalizer, SeriesDataset, WindowSet};
use crate::error::Result;
use crate::model::ProtoADModel;
use crate::scoring::{score_windows, ScoreMode, ScoreSeries};
use crate::trainer::{train, TrainConfig, TrainReport};

/// Normalizes (when configured) and windows a regular training series,
/// trains on it, and stores the normalizer in the model.
pub fn fit_detector(series: &SeriesDataset, cfg: &TrainConfig) -> Result<(ProtoADModel, TrainReport)> {
    cfg.validate()?;
    let normalizer = if cfg.normalize {
        Some(Normalizer::fit(series)?)
    } else {
        None
    };
    let prepared = match &normalizer {
        Some(n) => n.apply(series)?,
        None => series.clone(),
    };
    let windows = make_windows(&prepared, cfg.window_length, cfg.stride())?;
    let (mut model, report) = train(&windows, cfg)?;
    model.normalizer = normalizer;
    Ok((model, report))
}

/// Windows `series` the way the model was trained, in model input units.
pub fn model_windows(model: &ProtoADModel, series: &SeriesDataset) -> Result<WindowSet> {
    let prepared = model.preprocess(series)?;
    make_windows(&prepared, model.config.window_length, model.config.stride())
}

/// Window scores for a test series.
pub fn score_series(model: &ProtoADModel, series: &SeriesDataset, mode: ScoreMode) -> Result<ScoreSeries> {
    score_windows(model, &model_windows(model, series)?, mode)
}

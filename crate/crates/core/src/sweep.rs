//! Grid over latent size `m` and prototype count `k`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::SeriesDataset;
use crate::error::{Error, Result};
use crate::pipeline::{fit_detector, score_series};
use crate::trainer::TrainConfig;

/// Latent sizes of the reference grid.
pub const DEFAULT_M_GRID: [usize; 7] = [10, 50, 100, 200, 400, 600, 800];
/// Prototype counts of the reference grid; `k = 0` is the plain
/// encoder-decoder baseline.
pub const DEFAULT_K_GRID: [usize; 6] = [0, 5, 10, 20, 30, 50];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepCell {
    pub m: usize,
    pub k: usize,
    pub auc: f64,
    /// Mean wall-clock seconds per training epoch.
    pub seconds: f64,
}

/// Trains and evaluates one model per `(m, k)` pair, row-major over `ms`.
pub fn run_sweep(
    train: &SeriesDataset,
    test: &SeriesDataset,
    base: &TrainConfig,
    ms: &[usize],
    ks: &[usize],
) -> Result<Vec<SweepCell>> {
    if ms.is_empty() || ks.is_empty() {
        return Err(Error::InvalidArgument("sweep grids must be non-empty".into()));
    }
    let mut cells = Vec::with_capacity(ms.len() * ks.len());
    for &m in ms {
        for &k in ks {
            let cfg = TrainConfig { m, k, ..base.clone() };
            let (model, report) = fit_detector(train, &cfg)?;
            let auc = score_series(&model, test, cfg.score_mode)?.auc()?;
            cells.push(SweepCell {
                m,
                k,
                auc,
                seconds: report.mean_epoch_seconds(),
            });
        }
    }
    Ok(cells)
}

/// `m,k,auc,seconds` rows.
pub fn write_sweep_csv(cells: &[SweepCell], path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let mut writer = csv::Writer::from_path(path)?;
    for cell in cells {
        writer.serialize(cell)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

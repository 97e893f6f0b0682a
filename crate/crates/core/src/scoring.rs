//! Reconstruction errors, the Gaussian error model, point and window
//! anomaly scores, and window-level AUC.

use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::ProtoADModel;

/// Ridge added to the fitted covariance diagonal.
pub const COVARIANCE_RIDGE: f64 = 1e-6;

/// How point scores are computed from reconstruction errors.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ScoreMode {
    /// Squared Mahalanobis distance for every dimensionality; larger is more
    /// anomalous.
    #[default]
    Mahalanobis,
    /// Gaussian density of the error for univariate data (larger is more
    /// regular), Mahalanobis otherwise.
    PaperDensity,
}

impl ScoreMode {
    /// Whether larger window scores mean "more anomalous" for data of
    /// dimension `d`.
    pub fn higher_is_anomalous(self, d: usize) -> bool {
        !(self == ScoreMode::PaperDensity && d == 1)
    }
}

impl std::str::FromStr for ScoreMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "mahalanobis" => Ok(Self::Mahalanobis),
            "paper-density" => Ok(Self::PaperDensity),
            other => Err(Error::InvalidArgument(format!("unknown score mode `{other}`"))),
        }
    }
}

/// Normal model `N(mean, covariance)` of per-timestamp reconstruction errors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ErrorDistribution {
    pub mean: Vec<f64>,
    /// Regularized covariance `S + ridge * I`, `d x d` row-major.
    pub covariance: Vec<f64>,
    pub ridge: f64,
    /// Inverse of `covariance`.
    pub precision: Vec<f64>,
}

impl ErrorDistribution {
    /// Sample mean and sample covariance (denominator `N - 1`) plus a ridge of
    /// [`COVARIANCE_RIDGE`]. Needs at least `d + 1` vectors.
    pub fn fit(errors: &[Vec<f64>]) -> Result<Self> {
        let d = errors.first().map_or(0, Vec::len);
        if d == 0 || errors.len() < d + 1 {
            return Err(Error::InvalidArgument(format!(
                "need at least d + 1 = {} error vectors, got {}",
                d + 1,
                errors.len()
            )));
        }
        if let Some(bad) = errors.iter().find(|e| e.len() != d) {
            return Err(Error::shape(format!("error vectors of length {d}"), bad.len()));
        }
        let n = errors.len() as f64;
        let mut mean = vec![0.0; d];
        for e in errors {
            mean.iter_mut().zip(e).for_each(|(m, v)| *m += v);
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut cov = vec![0.0; d * d];
        for e in errors {
            for a in 0..d {
                let da = e[a] - mean[a];
                for b in a..d {
                    cov[a * d + b] += da * (e[b] - mean[b]);
                }
            }
        }
        for a in 0..d {
            for b in a..d {
                let v = cov[a * d + b] / (n - 1.0);
                cov[a * d + b] = v;
                cov[b * d + a] = v;
            }
            cov[a * d + a] += COVARIANCE_RIDGE;
        }
        let precision = spd_inverse(&cov, d)?;
        Ok(Self {
            mean,
            covariance: cov,
            ridge: COVARIANCE_RIDGE,
            precision,
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// `(e - mean)^T precision (e - mean)`.
    pub fn mahalanobis(&self, e: &[f64]) -> f64 {
        let d = self.dim();
        let diff: Vec<f64> = e.iter().zip(&self.mean).map(|(e, m)| e - m).collect();
        let mut total = 0.0;
        for a in 0..d {
            let row = &self.precision[a * d..(a + 1) * d];
            total += diff[a] * row.iter().zip(&diff).map(|(p, x)| p * x).sum::<f64>();
        }
        total
    }

    /// Univariate Gaussian density of `e` (first dimension only).
    pub fn density(&self, e: f64) -> f64 {
        let var = self.covariance[0];
        let z = e - self.mean[0];
        (-z * z / (2.0 * var)).exp() / (var * 2.0 * std::f64::consts::PI).sqrt()
    }

    pub fn point_score(&self, e: &[f64], mode: ScoreMode) -> f64 {
        match mode {
            ScoreMode::PaperDensity if self.dim() == 1 => self.density(e[0]),
            _ => self.mahalanobis(e),
        }
    }
}

/// Inverse of a symmetric positive definite matrix via Cholesky.
fn spd_inverse(a: &[f64], d: usize) -> Result<Vec<f64>> {
    let mut l = vec![0.0; d * d];
    for i in 0..d {
        for j in 0..=i {
            let mut s = a[i * d + j];
            for k in 0..j {
                s -= l[i * d + k] * l[j * d + k];
            }
            if i == j {
                if s <= 0.0 || !s.is_finite() {
                    return Err(Error::InvalidArgument("covariance is not positive definite".into()));
                }
                l[i * d + i] = s.sqrt();
            } else {
                l[i * d + j] = s / l[j * d + j];
            }
        }
    }
    // Solve L L^T x = e_c column by column.
    let mut inv = vec![0.0; d * d];
    let mut y = vec![0.0; d];
    for c in 0..d {
        for i in 0..d {
            let mut s = if i == c { 1.0 } else { 0.0 };
            for k in 0..i {
                s -= l[i * d + k] * y[k];
            }
            y[i] = s / l[i * d + i];
        }
        for i in (0..d).rev() {
            let mut s = y[i];
            for k in i + 1..d {
                s -= l[k * d + i] * inv[k * d + c];
            }
            inv[i * d + c] = s / l[i * d + i];
        }
    }
    Ok(inv)
}

/// `|x - x'|` per timestamp for every window: `errors[w][t]` has length `d`.
pub fn reconstruction_errors(model: &ProtoADModel, windows: &WindowSet) -> Result<Vec<Vec<Vec<f64>>>> {
    let d = model.params.dim();
    if windows.dim != d {
        return Err(Error::shape(format!("{d}-dimensional windows"), windows.dim));
    }
    windows
        .windows
        .iter()
        .map(|w| {
            let recon = model.reconstruct(w)?;
            Ok(w.chunks_exact(d)
                .zip(recon.chunks_exact(d))
                .map(|(x, r)| x.iter().zip(r).map(|(x, r)| (x - r).abs()).collect())
                .collect())
        })
        .collect()
}

/// Maximum of a window's timestamp scores.
pub fn window_score(scores: &[f64]) -> f64 {
    scores.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

/// Timestamp and window scores for a scored window set.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreSeries {
    /// Score per series timestamp (index 0 is the series start); `None`
    /// where no window covers the timestamp. Overlapping windows keep the
    /// largest score.
    pub point_scores: Vec<Option<f64>>,
    pub window_scores: Vec<f64>,
    pub labels: Vec<u8>,
    pub origins: Vec<usize>,
    pub mode: ScoreMode,
    pub dim: usize,
}

impl ScoreSeries {
    /// Window-level AUC, oriented so that higher means anomalous.
    pub fn auc(&self) -> Result<f64> {
        if self.mode.higher_is_anomalous(self.dim) {
            auc(&self.window_scores, &self.labels)
        } else {
            let negated: Vec<f64> = self.window_scores.iter().map(|s| -s).collect();
            auc(&negated, &self.labels)
        }
    }

    /// Writes `origin,score,label` rows.
    pub fn write_csv(&self, path: impl AsRef<std::path::Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record(["origin", "score", "label"])?;
        for i in 0..self.window_scores.len() {
            writer.write_record([
                self.origins[i].to_string(),
                self.window_scores[i].to_string(),
                self.labels[i].to_string(),
            ])?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Scores every window of `windows` with the model's fitted error
/// distribution.
pub fn score_windows(model: &ProtoADModel, windows: &WindowSet, mode: ScoreMode) -> Result<ScoreSeries> {
    let dist = model
        .error_distribution
        .as_ref()
        .ok_or_else(|| Error::InvalidArgument("model has no fitted error distribution".into()))?;
    let errors = reconstruction_errors(model, windows)?;
    let len = windows.length;
    let extent = windows.origins.last().map_or(0, |o| o + len);
    let mut point_scores: Vec<Option<f64>> = vec![None; extent];
    for (w, errs) in errors.iter().enumerate() {
        let origin = windows.origins[w];
        for (t, e) in errs.iter().enumerate() {
            let s = dist.point_score(e, mode);
            let slot = &mut point_scores[origin + t];
            *slot = Some(slot.map_or(s, |old| old.max(s)));
        }
    }
    let window_scores = windows
        .origins
        .iter()
        .map(|&o| {
            let scores: Vec<f64> = point_scores[o..o + len].iter().map(|s| s.unwrap()).collect();
            window_score(&scores)
        })
        .collect();
    Ok(ScoreSeries {
        point_scores,
        window_scores,
        labels: windows.labels.clone(),
        origins: windows.origins.clone(),
        mode,
        dim: windows.dim,
    })
}

/// Mann-Whitney estimate of the ROC AUC: the fraction of
/// (positive, negative) pairs in which the positive scores higher, ties
/// counting one half.
pub fn auc(scores: &[f64], labels: &[u8]) -> Result<f64> {
    if scores.len() != labels.len() {
        return Err(Error::shape(format!("{} labels", scores.len()), labels.len()));
    }
    if scores.iter().any(|s| s.is_nan()) {
        return Err(Error::InvalidArgument("NaN score".into()));
    }
    let n_pos = labels.iter().filter(|&&l| l == 1).count();
    let n_neg = labels.len() - n_pos;
    if n_pos == 0 || n_neg == 0 {
        return Err(Error::InvalidArgument(format!(
            "AUC needs both classes, got {n_pos} positive and {n_neg} negative windows"
        )));
    }
    let mut order: Vec<usize> = (0..scores.len()).collect();
    order.sort_by(|&a, &b| scores[a].total_cmp(&scores[b]));
    // Sum of 1-based mid-ranks of the positives.
    let mut rank_sum = 0.0;
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && scores[order[j + 1]] == scores[order[i]] {
            j += 1;
        }
        let mid_rank = (i + j) as f64 / 2.0 + 1.0;
        let positives = order[i..=j].iter().filter(|&&k| labels[k] == 1).count();
        rank_sum += mid_rank * positives as f64;
        i = j + 1;
    }
    let n_pos = n_pos as f64;
    let u = rank_sum - n_pos * (n_pos + 1.0) / 2.0;
    Ok(u / (n_pos * n_neg as f64))
}

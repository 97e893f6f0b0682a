//! Time series containers, CSV ingestion, the synthetic sine benchmark and
//! sliding windows.

use std::f64::consts::PI;
use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::rng::{stream_rng, Stream};

/// Smallest standard deviation a [`Normalizer`] will divide by.
pub const STD_FLOOR: f64 = 1e-8;

/// A `T x d` multivariate series with point-level labels.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeriesDataset {
    pub name: String,
    /// Feature column names, length `dim`.
    pub columns: Vec<String>,
    /// Row-major values, length `len() * dim`.
    pub values: Vec<f64>,
    /// 0 = regular, 1 = anomaly.
    pub labels: Vec<u8>,
    pub dim: usize,
}

impl SeriesDataset {
    /// Builds a dataset, checking the container invariants.
    pub fn new(
        name: impl Into<String>,
        columns: Vec<String>,
        values: Vec<f64>,
        labels: Vec<u8>,
    ) -> Result<Self> {
        let dim = columns.len();
        if dim == 0 {
            return Err(Error::InvalidArgument("dataset needs at least one feature column".into()));
        }
        if values.len() != labels.len() * dim {
            return Err(Error::shape(
                format!("{} values ({} rows x {dim})", labels.len() * dim, labels.len()),
                values.len(),
            ));
        }
        if let Some(pos) = values.iter().position(|v| !v.is_finite()) {
            return Err(Error::Parse {
                row: pos / dim,
                column: columns[pos % dim].clone(),
                message: "non-finite value".into(),
            });
        }
        if let Some(&bad) = labels.iter().find(|&&l| l > 1) {
            return Err(Error::InvalidArgument(format!("label {bad} is not 0/1")));
        }
        Ok(Self {
            name: name.into(),
            columns,
            values,
            labels,
            dim,
        })
    }

    /// Number of timestamps `T`.
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.values[t * self.dim..(t + 1) * self.dim]
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }

    /// Writes the dataset as CSV: feature columns followed by `label`.
    pub fn write_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = self.columns.clone();
        header.push("label".into());
        writer.write_record(&header)?;
        let mut record = Vec::with_capacity(self.dim + 1);
        for t in 0..self.len() {
            record.clear();
            record.extend(self.row(t).iter().map(|v| v.to_string()));
            record.push(self.labels[t].to_string());
            writer.write_record(&record)?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }
}

/// Column selection for [`load_csv`].
#[derive(Debug, Clone, Default)]
pub struct CsvOptions {
    /// Name of the 0/1 label column, if any. A named column that is absent
    /// from the header is an error.
    pub label_column: Option<String>,
    /// Columns skipped entirely (timestamps and the like).
    pub ignore_columns: Vec<String>,
}

/// Loads a headered CSV file; every column other than the label and ignored
/// ones must hold finite reals.
pub fn load_csv(path: impl AsRef<Path>, options: &CsvOptions) -> Result<SeriesDataset> {
    let path = path.as_ref();
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(file);
    let header: Vec<String> = reader.headers()?.iter().map(str::to_owned).collect();

    let label_idx = match &options.label_column {
        Some(name) => Some(header.iter().position(|h| h == name).ok_or_else(|| {
            Error::InvalidArgument(format!("label column `{name}` not found in {}", path.display()))
        })?),
        None => None,
    };
    let feature_idx: Vec<usize> = (0..header.len())
        .filter(|&i| Some(i) != label_idx && !options.ignore_columns.contains(&header[i]))
        .collect();
    if feature_idx.is_empty() {
        return Err(Error::InvalidArgument(format!("{} has no feature columns", path.display())));
    }

    let mut values = Vec::new();
    let mut labels = Vec::new();
    for (row, record) in reader.records().enumerate() {
        let record = record?;
        for &i in &feature_idx {
            let cell = record.get(i).unwrap_or("");
            let value: f64 = cell.parse().map_err(|_| Error::Parse {
                row,
                column: header[i].clone(),
                message: format!("`{cell}` is not a real number"),
            })?;
            if !value.is_finite() {
                return Err(Error::Parse {
                    row,
                    column: header[i].clone(),
                    message: format!("non-finite value `{cell}`"),
                });
            }
            values.push(value);
        }
        let label = match label_idx {
            Some(i) => match record.get(i).unwrap_or("") {
                "0" => 0,
                "1" => 1,
                other => {
                    return Err(Error::Parse {
                        row,
                        column: header[i].clone(),
                        message: format!("label `{other}` is not 0 or 1"),
                    })
                }
            },
            None => 0,
        };
        labels.push(label);
    }

    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    let columns = feature_idx.iter().map(|&i| header[i].clone()).collect();
    SeriesDataset::new(name, columns, values, labels)
}

/// Recipe for the sine-wave benchmark with injected point anomalies.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticConfig {
    pub total_length: usize,
    pub period: usize,
    /// Noise is uniform on `[0, noise_max]`.
    pub noise_max: f64,
    pub anomaly_gap: usize,
    /// Anomaly factors are uniform on `[alpha_min, alpha_max]`.
    pub alpha_min: f64,
    pub alpha_max: f64,
    pub seed: u64,
}

impl Default for SyntheticConfig {
    fn default() -> Self {
        Self {
            total_length: 20_000,
            period: 100,
            noise_max: 0.1,
            anomaly_gap: 100,
            alpha_min: 0.0,
            alpha_max: 1.0,
            seed: 0,
        }
    }
}

/// Generates the train half (regular only) and the test half (an anomaly
/// every `anomaly_gap` timestamps) of a noisy sine wave.
pub fn generate_synthetic(cfg: &SyntheticConfig) -> Result<(SeriesDataset, SeriesDataset)> {
    if cfg.period == 0 {
        return Err(Error::InvalidArgument("period must be positive".into()));
    }
    if cfg.anomaly_gap == 0 || !cfg.anomaly_gap.is_multiple_of(cfg.period) {
        return Err(Error::InvalidArgument(format!(
            "anomaly gap {} must be a positive multiple of the period {}",
            cfg.anomaly_gap, cfg.period
        )));
    }
    if cfg.total_length == 0 || !cfg.total_length.is_multiple_of(2) {
        return Err(Error::InvalidArgument(format!(
            "total length {} must be positive and even",
            cfg.total_length
        )));
    }
    if !(cfg.noise_max >= 0.0 && cfg.noise_max.is_finite()) {
        return Err(Error::InvalidArgument("noise_max must be finite and non-negative".into()));
    }
    if !(0.0 <= cfg.alpha_min && cfg.alpha_min <= cfg.alpha_max && cfg.alpha_max.is_finite()) {
        return Err(Error::InvalidArgument("need 0 <= alpha_min <= alpha_max".into()));
    }

    let mut rng = stream_rng(cfg.seed, Stream::Data);
    let half = cfg.total_length / 2;
    let mut values = Vec::with_capacity(cfg.total_length);
    let mut labels = Vec::with_capacity(cfg.total_length);
    for t in 0..cfg.total_length {
        let noise = if cfg.noise_max > 0.0 {
            rng.gen_range(0.0..=cfg.noise_max)
        } else {
            0.0
        };
        let mut value = (2.0 * PI * t as f64 / cfg.period as f64).sin() + noise;
        let mut label = 0;
        if t >= half && t % cfg.anomaly_gap == 0 {
            value += if cfg.alpha_max > cfg.alpha_min {
                rng.gen_range(cfg.alpha_min..=cfg.alpha_max)
            } else {
                cfg.alpha_min
            };
            label = 1;
        }
        values.push(value);
        labels.push(label);
    }

    let columns = vec!["dim_0".to_string()];
    let test_values = values.split_off(half);
    let test_labels = labels.split_off(half);
    let train = SeriesDataset::new("synthetic_train", columns.clone(), values, labels)?;
    let test = SeriesDataset::new("synthetic_test", columns, test_values, test_labels)?;
    Ok((train, test))
}

/// Sliding windows over a series. Each window is a row-major `L x d` block.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowSet {
    pub windows: Vec<Vec<f64>>,
    pub labels: Vec<u8>,
    /// Index of each window's first timestamp in the source series.
    pub origins: Vec<usize>,
    pub length: usize,
    pub stride: usize,
    pub dim: usize,
}

impl WindowSet {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Windows `range` of this set, keeping geometry.
    pub fn slice(&self, range: std::ops::Range<usize>) -> WindowSet {
        WindowSet {
            windows: self.windows[range.clone()].to_vec(),
            labels: self.labels[range.clone()].to_vec(),
            origins: self.origins[range].to_vec(),
            length: self.length,
            stride: self.stride,
            dim: self.dim,
        }
    }

    /// Windows at the given indices, in that order.
    pub fn select(&self, indices: &[usize]) -> WindowSet {
        WindowSet {
            windows: indices.iter().map(|&i| self.windows[i].clone()).collect(),
            labels: indices.iter().map(|&i| self.labels[i]).collect(),
            origins: indices.iter().map(|&i| self.origins[i]).collect(),
            length: self.length,
            stride: self.stride,
            dim: self.dim,
        }
    }

    pub fn anomaly_count(&self) -> usize {
        self.labels.iter().filter(|&&l| l == 1).count()
    }
}

/// Cuts full windows of `length` rows starting at `0, stride, 2*stride, ...`.
/// A window is labeled anomalous iff any of its points is.
pub fn make_windows(data: &SeriesDataset, length: usize, stride: usize) -> Result<WindowSet> {
    if length == 0 || stride == 0 {
        return Err(Error::InvalidArgument("window length and stride must be positive".into()));
    }
    if length > data.len() {
        return Err(Error::InvalidArgument(format!(
            "window length {length} exceeds series length {}",
            data.len()
        )));
    }
    let d = data.dim;
    let origins: Vec<usize> = (0..=data.len() - length).step_by(stride).collect();
    let windows = origins
        .iter()
        .map(|&o| data.values[o * d..(o + length) * d].to_vec())
        .collect();
    let labels = origins
        .iter()
        .map(|&o| data.labels[o..o + length].iter().copied().max().unwrap_or(0))
        .collect();
    Ok(WindowSet {
        windows,
        labels,
        origins,
        length,
        stride,
        dim: d,
    })
}

/// Per-dimension z-scoring fitted on training data.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl Normalizer {
    /// Population mean and standard deviation of every column; the standard
    /// deviation is floored at [`STD_FLOOR`].
    pub fn fit(train: &SeriesDataset) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("cannot fit a normalizer on an empty series".into()));
        }
        let n = train.len() as f64;
        let d = train.dim;
        let mut mean = vec![0.0; d];
        for t in 0..train.len() {
            for (m, v) in mean.iter_mut().zip(train.row(t)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; d];
        for t in 0..train.len() {
            for ((s, v), m) in var.iter_mut().zip(train.row(t)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let std = var.iter().map(|s| (s / n).sqrt().max(STD_FLOOR)).collect();
        Ok(Self { mean, std })
    }

    pub fn apply(&self, data: &SeriesDataset) -> Result<SeriesDataset> {
        self.map(data, |v, m, s| (v - m) / s)
    }

    pub fn invert(&self, data: &SeriesDataset) -> Result<SeriesDataset> {
        self.map(data, |v, m, s| v * s + m)
    }

    fn map(&self, data: &SeriesDataset, f: impl Fn(f64, f64, f64) -> f64) -> Result<SeriesDataset> {
        if data.dim != self.mean.len() {
            return Err(Error::shape(format!("{} columns", self.mean.len()), data.dim));
        }
        let d = data.dim;
        let values = data
            .values
            .iter()
            .enumerate()
            .map(|(i, &v)| f(v, self.mean[i % d], self.std[i % d]))
            .collect();
        Ok(SeriesDataset {
            values,
            ..data.clone()
        })
    }
}

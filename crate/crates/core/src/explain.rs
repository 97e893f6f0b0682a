//! Example-based explanations: each prototype is shown as the real
//! training window whose embedding is nearest to it, and test windows are
//! attached to their nearest prototype.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::data::WindowSet;
use crate::error::{Error, Result};
use crate::model::ProtoADModel;
use crate::prototype::squared_distance;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeProjection {
    pub prototype: usize,
    /// Origin of the source training window.
    pub origin: usize,
    /// Index of the source window in the training set.
    pub window_index: usize,
    /// Squared latent distance between prototype and source embedding.
    pub distance: f64,
    /// Source window in input units, `L x d` row-major.
    pub window: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct WindowAssignment {
    pub origin: usize,
    pub prototype: usize,
    pub distance: f64,
    pub label: u8,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExplanationReport {
    pub length: usize,
    pub dim: usize,
    pub projections: Vec<PrototypeProjection>,
    /// Grouped by prototype, nearest first within each group.
    pub assignments: Vec<WindowAssignment>,
}

fn require_prototypes(model: &ProtoADModel) -> Result<()> {
    if model.prototypes.k == 0 {
        return Err(Error::InvalidArgument("model has no prototypes to explain".into()));
    }
    Ok(())
}

fn to_input_units(model: &ProtoADModel, window: &[f64]) -> Vec<f64> {
    match &model.normalizer {
        Some(n) => window
            .iter()
            .enumerate()
            .map(|(i, v)| v * n.std[i % n.std.len()] + n.mean[i % n.mean.len()])
            .collect(),
        None => window.to_vec(),
    }
}

/// Maps every prototype to a distinct training window. Prototypes are
/// visited in index order and each takes its nearest window not already
/// taken.
pub fn project_prototypes(model: &ProtoADModel, train: &WindowSet) -> Result<Vec<PrototypeProjection>> {
    require_prototypes(model)?;
    let k = model.prototypes.k;
    if train.len() < k {
        return Err(Error::InvalidArgument(format!(
            "{k} prototypes need at least {k} training windows, got {}",
            train.len()
        )));
    }
    let embeddings = train
        .windows
        .iter()
        .map(|w| model.embed(w))
        .collect::<Result<Vec<_>>>()?;
    let mut taken = vec![false; train.len()];
    let mut out = Vec::with_capacity(k);
    for j in 0..k {
        let p = model.prototypes.prototype(j);
        let mut best: Option<(usize, f64)> = None;
        for (i, h) in embeddings.iter().enumerate() {
            if taken[i] {
                continue;
            }
            let d = squared_distance(p, h);
            if best.is_none_or(|(_, b)| d < b) {
                best = Some((i, d));
            }
        }
        let (i, distance) = best.expect("enough windows");
        taken[i] = true;
        out.push(PrototypeProjection {
            prototype: j,
            origin: train.origins[i],
            window_index: i,
            distance,
            window: to_input_units(model, &train.windows[i]),
        });
    }
    Ok(out)
}

/// Nearest prototype for each window, in input order.
pub fn assign_windows(model: &ProtoADModel, windows: &WindowSet) -> Result<Vec<WindowAssignment>> {
    require_prototypes(model)?;
    windows
        .windows
        .iter()
        .enumerate()
        .map(|(i, w)| {
            let (prototype, distance) = model.prototypes.assign(&model.embed(w)?)?;
            Ok(WindowAssignment {
                origin: windows.origins[i],
                prototype,
                distance,
                label: windows.labels[i],
            })
        })
        .collect()
}

/// Projections for the training windows plus sorted test assignments.
pub fn explain(model: &ProtoADModel, train: &WindowSet, test: &WindowSet) -> Result<ExplanationReport> {
    let projections = project_prototypes(model, train)?;
    let mut assignments = assign_windows(model, test)?;
    assignments.sort_by(|a, b| {
        a.prototype
            .cmp(&b.prototype)
            .then(a.distance.total_cmp(&b.distance))
            .then(a.origin.cmp(&b.origin))
    });
    Ok(ExplanationReport {
        length: train.length,
        dim: train.dim,
        projections,
        assignments,
    })
}

impl ExplanationReport {
    /// The `n` nearest windows assigned to prototype `j`.
    pub fn top_assigned(&self, j: usize, n: usize) -> impl Iterator<Item = &WindowAssignment> {
        self.assignments.iter().filter(move |a| a.prototype == j).take(n)
    }

    pub fn write_json(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        std::fs::write(path, serde_json::to_string_pretty(self)?).map_err(|e| Error::io(path, e))
    }

    /// Long-format CSV of the projected windows:
    /// `prototype,origin,step,dim_0..`.
    pub fn write_projection_csv(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        let mut header = vec!["prototype".to_string(), "origin".into(), "step".into()];
        header.extend((0..self.dim).map(|j| format!("dim_{j}")));
        writer.write_record(&header)?;
        for p in &self.projections {
            for (step, row) in p.window.chunks_exact(self.dim).enumerate() {
                let mut record = vec![p.prototype.to_string(), p.origin.to_string(), step.to_string()];
                record.extend(row.iter().map(|v| v.to_string()));
                writer.write_record(&record)?;
            }
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        Ok(())
    }

    /// Line plot of prototype `j`'s projected window overlaid with its
    /// `top` nearest assigned windows (grey regular, red anomalous).
    /// Univariate data only; `test` supplies the assigned windows.
    pub fn prototype_svg(&self, model: &ProtoADModel, test: &WindowSet, j: usize, top: usize) -> Result<String> {
        if self.dim != 1 {
            return Err(Error::InvalidArgument("SVG plots need univariate data".into()));
        }
        let proj = self
            .projections
            .get(j)
            .ok_or_else(|| Error::InvalidArgument(format!("no prototype {j}")))?;
        let index_of = |origin: usize| test.origins.iter().position(|&o| o == origin);
        let mut series: Vec<(Vec<f64>, &str, f64)> = Vec::new();
        for a in self.top_assigned(j, top) {
            if let Some(i) = index_of(a.origin) {
                let colour = if a.label == 1 { "#d62728" } else { "#9e9e9e" };
                series.push((to_input_units(model, &test.windows[i]), colour, 1.0));
            }
        }
        series.push((proj.window.clone(), "#1f3b73", 2.5));

        let (w, h, pad) = (480.0, 240.0, 16.0);
        let lo = series.iter().flat_map(|s| s.0.iter().copied()).fold(f64::INFINITY, f64::min);
        let hi = series.iter().flat_map(|s| s.0.iter().copied()).fold(f64::NEG_INFINITY, f64::max);
        let span = if hi > lo { hi - lo } else { 1.0 };
        let steps = (self.length.max(2) - 1) as f64;
        let mut svg = String::new();
        let _ = writeln!(
            svg,
            r#"<svg xmlns="http://www.w3.org/2000/svg" width="{w}" height="{h}" viewBox="0 0 {w} {h}">"#
        );
        let _ = writeln!(svg, r#"<rect width="{w}" height="{h}" fill="white"/>"#);
        for (values, colour, width) in &series {
            let points: Vec<String> = values
                .iter()
                .enumerate()
                .map(|(t, v)| {
                    let x = pad + (w - 2.0 * pad) * t as f64 / steps;
                    let y = h - pad - (h - 2.0 * pad) * (v - lo) / span;
                    format!("{x:.2},{y:.2}")
                })
                .collect();
            let _ = writeln!(
                svg,
                r#"<polyline fill="none" stroke="{colour}" stroke-width="{width}" points="{}"/>"#,
                points.join(" ")
            );
        }
        svg.push_str("</svg>\n");
        Ok(svg)
    }
}

/// Writes one CSV row per window embedding and per prototype:
/// `role,origin,latent_0..`. Windows carry role `regular`/`anomaly` and
/// their origin; prototype rows carry role `prototype` and the prototype
/// index in the origin column.
pub fn export_latent(model: &ProtoADModel, windows: &WindowSet, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let m = model.params.hidden();
    let mut writer = csv::Writer::from_path(path)?;
    let mut header = vec!["role".to_string(), "origin".into()];
    header.extend((0..m).map(|t| format!("latent_{t}")));
    writer.write_record(&header)?;
    for (i, w) in windows.windows.iter().enumerate() {
        let role = if windows.labels[i] == 1 { "anomaly" } else { "regular" };
        let mut record = vec![role.to_string(), windows.origins[i].to_string()];
        record.extend(model.embed(w)?.iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    for j in 0..model.prototypes.k {
        let mut record = vec!["prototype".to_string(), j.to_string()];
        record.extend(model.prototypes.prototype(j).iter().map(|v| v.to_string()));
        writer.write_record(&record)?;
    }
    writer.flush().map_err(|e| Error::io(path, e))?;
    Ok(())
}

//! Prototype layer: `k` learned latent vectors with a diversity hinge and a
//! bidirectional nearest-neighbour representation loss.

use std::path::Path;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Squared Euclidean distance.
#[inline]
pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index and value of the smallest item; ties go to the lowest index.
fn argmin(values: impl Iterator<Item = f64>) -> Option<(usize, f64)> {
    let mut best: Option<(usize, f64)> = None;
    for (i, v) in values.enumerate() {
        match best {
            Some((_, b)) if v >= b => {}
            _ => best = Some((i, v)),
        }
    }
    best
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PrototypeLayer {
    pub k: usize,
    pub m: usize,
    /// Diversity threshold on squared distance.
    pub d_min: f64,
    /// `k x m` row-major.
    pub values: Vec<f64>,
}

/// Gradients of the weighted prototype losses.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeGradients {
    /// `k x m`, same layout as [`PrototypeLayer::values`].
    pub prototypes: Vec<f64>,
    /// One gradient per hidden vector.
    pub hidden: Vec<Vec<f64>>,
}

impl PrototypeLayer {
    /// `k` prototypes with entries uniform in `[-1, 1]`.
    pub fn init(k: usize, m: usize, d_min: f64, rng: &mut impl Rng) -> Self {
        let values = (0..k * m).map(|_| rng.gen_range(-1.0..=1.0)).collect();
        Self { k, m, d_min, values }
    }

    pub fn prototype(&self, j: usize) -> &[f64] {
        &self.values[j * self.m..(j + 1) * self.m]
    }

    pub fn check(&self) -> Result<()> {
        if self.values.len() != self.k * self.m {
            return Err(Error::shape(format!("{} x {} prototypes", self.k, self.m), self.values.len()));
        }
        if self.values.iter().any(|v| !v.is_finite()) || !(self.d_min > 0.0 && self.d_min.is_finite()) {
            return Err(Error::InvalidArgument("prototypes and d_min must be finite, d_min positive".into()));
        }
        Ok(())
    }

    /// `sum_{i<j} max(0, d_min - |p_i - p_j|^2)^2`.
    pub fn diversity_loss(&self) -> f64 {
        let mut loss = 0.0;
        for i in 0..self.k {
            for j in i + 1..self.k {
                let hinge = self.d_min - squared_distance(self.prototype(i), self.prototype(j));
                if hinge > 0.0 {
                    loss += hinge * hinge;
                }
            }
        }
        loss
    }

    /// `(1/k) sum_j min_i |p_j - h_i|^2 + (1/n) sum_i min_j |h_i - p_j|^2`;
    /// zero when `k == 0` or `hidden` is empty.
    pub fn representation_loss(&self, hidden: &[Vec<f64>]) -> f64 {
        if self.k == 0 || hidden.is_empty() {
            return 0.0;
        }
        let dist = self.distance_table(hidden);
        let n = hidden.len();
        let to_embedding: f64 = (0..self.k)
            .map(|j| argmin((0..n).map(|i| dist[i * self.k + j])).unwrap().1)
            .sum();
        let to_prototype: f64 = (0..n)
            .map(|i| argmin(dist[i * self.k..(i + 1) * self.k].iter().copied()).unwrap().1)
            .sum();
        to_embedding / self.k as f64 + to_prototype / n as f64
    }

    /// `n x k` table of squared distances.
    fn distance_table(&self, hidden: &[Vec<f64>]) -> Vec<f64> {
        let mut dist = Vec::with_capacity(hidden.len() * self.k);
        for h in hidden {
            dist.extend((0..self.k).map(|j| squared_distance(h, self.prototype(j))));
        }
        dist
    }

    /// Gradients of `diversity_weight * L_d + representation_weight * L_r`
    /// with respect to the prototypes and to each hidden vector. At argmin
    /// ties the lowest-index minimizer receives the gradient; hinge
    /// boundaries take the zero branch.
    pub fn loss_gradients(
        &self,
        hidden: &[Vec<f64>],
        diversity_weight: f64,
        representation_weight: f64,
    ) -> PrototypeGradients {
        let m = self.m;
        let mut gp = vec![0.0; self.k * m];
        let mut gh: Vec<Vec<f64>> = hidden.iter().map(|h| vec![0.0; h.len()]).collect();

        if diversity_weight != 0.0 {
            for i in 0..self.k {
                for j in i + 1..self.k {
                    let (pi, pj) = (self.prototype(i), self.prototype(j));
                    let hinge = self.d_min - squared_distance(pi, pj);
                    if hinge <= 0.0 {
                        continue;
                    }
                    let scale = 4.0 * diversity_weight * hinge;
                    for t in 0..m {
                        let diff = pi[t] - pj[t];
                        gp[i * m + t] -= scale * diff;
                        gp[j * m + t] += scale * diff;
                    }
                }
            }
        }

        if representation_weight != 0.0 && self.k > 0 && !hidden.is_empty() {
            let n = hidden.len();
            let dist = self.distance_table(hidden);
            let per_proto = 2.0 * representation_weight / self.k as f64;
            for j in 0..self.k {
                let (i, _) = argmin((0..n).map(|i| dist[i * self.k + j])).unwrap();
                let p = self.prototype(j);
                for t in 0..m {
                    let diff = p[t] - hidden[i][t];
                    gp[j * m + t] += per_proto * diff;
                    gh[i][t] -= per_proto * diff;
                }
            }
            let per_hidden = 2.0 * representation_weight / n as f64;
            for (i, h) in hidden.iter().enumerate() {
                let (j, _) = argmin(dist[i * self.k..(i + 1) * self.k].iter().copied()).unwrap();
                let p = self.prototype(j);
                for t in 0..m {
                    let diff = h[t] - p[t];
                    gh[i][t] += per_hidden * diff;
                    gp[j * m + t] -= per_hidden * diff;
                }
            }
        }

        PrototypeGradients {
            prototypes: gp,
            hidden: gh,
        }
    }

    /// Nearest prototype to `h` and its squared distance.
    pub fn assign(&self, h: &[f64]) -> Result<(usize, f64)> {
        if self.k == 0 {
            return Err(Error::InvalidArgument("cannot assign with zero prototypes".into()));
        }
        if h.len() != self.m {
            return Err(Error::shape(format!("latent vector of length {}", self.m), h.len()));
        }
        Ok(argmin((0..self.k).map(|j| squared_distance(h, self.prototype(j)))).unwrap())
    }

    /// Writes the prototypes as a `k`-row CSV plus a JSON sidecar
    /// (same stem, `.json` extension) recording `d_min` and the training seed.
    pub fn export(&self, path: impl AsRef<Path>, seed: u64) -> Result<()> {
        let path = path.as_ref();
        let mut writer = csv::Writer::from_path(path)?;
        writer.write_record((0..self.m).map(|t| format!("latent_{t}")))?;
        for j in 0..self.k {
            writer.write_record(self.prototype(j).iter().map(|v| v.to_string()))?;
        }
        writer.flush().map_err(|e| Error::io(path, e))?;
        let sidecar = serde_json::json!({
            "k": self.k,
            "m": self.m,
            "d_min": self.d_min,
            "seed": seed,
        });
        let side_path = path.with_extension("json");
        std::fs::write(&side_path, serde_json::to_string_pretty(&sidecar)?)
            .map_err(|e| Error::io(&side_path, e))
    }
}

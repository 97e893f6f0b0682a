//! Single-layer LSTM cell with hand-written backpropagation.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Order of the four gate blocks inside `w`, `u` and `b`.
pub const GATE_ORDER: &str = "ifgo";

/// Weights of one LSTM unit. Gate blocks are stacked in [`GATE_ORDER`]
/// (input, forget, cell, output), each `hidden` rows tall; matrices are
/// row-major.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LstmParams {
    pub in_dim: usize,
    pub hidden: usize,
    /// `4*hidden x in_dim`
    pub w: Vec<f64>,
    /// `4*hidden x hidden`
    pub u: Vec<f64>,
    /// `4*hidden`
    pub b: Vec<f64>,
}

/// Values saved by one forward step for the backward pass.
#[derive(Debug, Clone)]
pub(crate) struct StepCache {
    pub x: Vec<f64>,
    pub h_prev: Vec<f64>,
    pub c_prev: Vec<f64>,
    /// Post-activation gates `[i, f, g, o]`.
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub tanh_c: Vec<f64>,
    pub h: Vec<f64>,
}

#[inline]
fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

impl LstmParams {
    pub fn zeros(in_dim: usize, hidden: usize) -> Self {
        Self {
            in_dim,
            hidden,
            w: vec![0.0; 4 * hidden * in_dim],
            u: vec![0.0; 4 * hidden * hidden],
            b: vec![0.0; 4 * hidden],
        }
    }

    /// Weights uniform in `[-1/sqrt(m), 1/sqrt(m)]`, zero biases except a
    /// forget-gate bias of 1.
    pub fn init(in_dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let bound = 1.0 / (hidden as f64).sqrt();
        let mut p = Self::zeros(in_dim, hidden);
        p.w.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
        p.u.iter_mut().for_each(|v| *v = rng.gen_range(-bound..=bound));
        p.b[hidden..2 * hidden].iter_mut().for_each(|v| *v = 1.0);
        p
    }

    pub(crate) fn check(&self) -> Result<()> {
        let m = self.hidden;
        if m == 0 || self.in_dim == 0 {
            return Err(Error::InvalidArgument("LSTM sizes must be positive".into()));
        }
        for (name, len, want) in [
            ("w", self.w.len(), 4 * m * self.in_dim),
            ("u", self.u.len(), 4 * m * m),
            ("b", self.b.len(), 4 * m),
        ] {
            if len != want {
                return Err(Error::shape(format!("{name} of length {want}"), len));
            }
        }
        if self.w.iter().chain(&self.u).chain(&self.b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite LSTM weight".into()));
        }
        Ok(())
    }

    pub(crate) fn step(&self, x: &[f64], h_prev: &[f64], c_prev: &[f64]) -> StepCache {
        let m = self.hidden;
        let n_in = self.in_dim;
        let mut gates = self.b.clone();
        for (r, a) in gates.iter_mut().enumerate() {
            let w_row = &self.w[r * n_in..(r + 1) * n_in];
            let u_row = &self.u[r * m..(r + 1) * m];
            *a += w_row.iter().zip(x).map(|(w, x)| w * x).sum::<f64>()
                + u_row.iter().zip(h_prev).map(|(u, h)| u * h).sum::<f64>();
        }
        for (r, a) in gates.iter_mut().enumerate() {
            *a = if (2 * m..3 * m).contains(&r) { a.tanh() } else { sigmoid(*a) };
        }
        let mut c = vec![0.0; m];
        let mut tanh_c = vec![0.0; m];
        let mut h = vec![0.0; m];
        for j in 0..m {
            let (i, f, g, o) = (gates[j], gates[m + j], gates[2 * m + j], gates[3 * m + j]);
            c[j] = f * c_prev[j] + i * g;
            tanh_c[j] = c[j].tanh();
            h[j] = o * tanh_c[j];
        }
        StepCache {
            x: x.to_vec(),
            h_prev: h_prev.to_vec(),
            c_prev: c_prev.to_vec(),
            gates,
            c,
            tanh_c,
            h,
        }
    }

    /// Backpropagates through one step. `dh`/`dc` are the gradients on this
    /// step's outputs; parameter gradients accumulate into `grads` and the
    /// gradients on the step's inputs are written to `dh_prev`/`dc_prev`.
    pub(crate) fn step_backward(
        &self,
        cache: &StepCache,
        dh: &[f64],
        dc: &[f64],
        grads: &mut LstmParams,
        dh_prev: &mut [f64],
        dc_prev: &mut [f64],
    ) {
        let m = self.hidden;
        let n_in = self.in_dim;
        let g = &cache.gates;
        let mut da = vec![0.0; 4 * m];
        for j in 0..m {
            let (i, f, cg, o) = (g[j], g[m + j], g[2 * m + j], g[3 * m + j]);
            let tc = cache.tanh_c[j];
            let dcj = dc[j] + dh[j] * o * (1.0 - tc * tc);
            da[j] = dcj * cg * i * (1.0 - i);
            da[m + j] = dcj * cache.c_prev[j] * f * (1.0 - f);
            da[2 * m + j] = dcj * i * (1.0 - cg * cg);
            da[3 * m + j] = dh[j] * tc * o * (1.0 - o);
            dc_prev[j] = dcj * f;
        }
        dh_prev.iter_mut().for_each(|v| *v = 0.0);
        for (r, &a) in da.iter().enumerate() {
            if a == 0.0 {
                continue;
            }
            let gw = &mut grads.w[r * n_in..(r + 1) * n_in];
            gw.iter_mut().zip(&cache.x).for_each(|(gw, x)| *gw += a * x);
            let gu = &mut grads.u[r * m..(r + 1) * m];
            gu.iter_mut().zip(&cache.h_prev).for_each(|(gu, h)| *gu += a * h);
            grads.b[r] += a;
            let u_row = &self.u[r * m..(r + 1) * m];
            dh_prev.iter_mut().zip(u_row).for_each(|(d, u)| *d += a * u);
        }
    }
}

/// One LSTM step: returns the new hidden and cell state.
pub fn lstm_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> Result<(Vec<f64>, Vec<f64>)> {
    if x.len() != p.in_dim {
        return Err(Error::shape(format!("input of length {}", p.in_dim), x.len()));
    }
    if h.len() != p.hidden || c.len() != p.hidden {
        return Err(Error::shape(
            format!("state of length {}", p.hidden),
            format!("h {} / c {}", h.len(), c.len()),
        ));
    }
    let cache = p.step(x, h, c);
    Ok((cache.h, cache.c))
}

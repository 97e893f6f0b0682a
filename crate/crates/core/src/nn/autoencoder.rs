//! LSTM encoder/decoder over one window, with backpropagation through time.
//!
//! The encoder's last hidden state is the window embedding. The decoder
//! starts from that hidden state (zero cell state) and is teacher-forced:
//! each step consumes the true row reconstructed by the previous step, the
//! first step a zero vector. Every decoder hidden state is projected to one
//! reconstructed row.

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::lstm::{LstmParams, StepCache};
use crate::error::{Error, Result};

/// Order in which the decoder emits window rows.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "lowercase")]
pub enum DecoderOrder {
    Forward,
    /// Last row first.
    #[default]
    Reversed,
}

impl DecoderOrder {
    /// Row reconstructed at decoder step `s` of `len`.
    #[inline]
    pub fn target(self, s: usize, len: usize) -> usize {
        match self {
            DecoderOrder::Forward => s,
            DecoderOrder::Reversed => len - 1 - s,
        }
    }
}

impl std::str::FromStr for DecoderOrder {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" => Ok(Self::Forward),
            "reversed" => Ok(Self::Reversed),
            other => Err(Error::InvalidArgument(format!("unknown decoder order `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AutoencoderParams {
    pub encoder: LstmParams,
    pub decoder: LstmParams,
    /// Output projection, `d x m` row-major.
    pub proj_w: Vec<f64>,
    /// Output bias, length `d`.
    pub proj_b: Vec<f64>,
}

/// Cached forward pass over one window.
#[derive(Debug, Clone)]
pub struct ForwardPass {
    encoder_steps: Vec<StepCache>,
    decoder_steps: Vec<StepCache>,
    order: DecoderOrder,
    /// Final encoder hidden state.
    pub embedding: Vec<f64>,
    /// Reconstructed window, `L x d` row-major, rows in time order.
    pub reconstruction: Vec<f64>,
}

/// Loss gradients flowing into one forward pass.
#[derive(Debug, Clone)]
pub struct Upstream<'a> {
    /// d loss / d reconstruction, `L x d`.
    pub reconstruction: &'a [f64],
    /// d loss / d embedding from losses other than reconstruction, length `m`.
    pub embedding: Option<&'a [f64]>,
}

impl AutoencoderParams {
    pub fn zeros(dim: usize, hidden: usize) -> Self {
        Self {
            encoder: LstmParams::zeros(dim, hidden),
            decoder: LstmParams::zeros(dim, hidden),
            proj_w: vec![0.0; dim * hidden],
            proj_b: vec![0.0; dim],
        }
    }

    pub fn init(dim: usize, hidden: usize, rng: &mut impl Rng) -> Self {
        let encoder = LstmParams::init(dim, hidden, rng);
        let decoder = LstmParams::init(dim, hidden, rng);
        let bound = 1.0 / (hidden as f64).sqrt();
        let proj_w = (0..dim * hidden).map(|_| rng.gen_range(-bound..=bound)).collect();
        Self {
            encoder,
            decoder,
            proj_w,
            proj_b: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.encoder.in_dim
    }

    pub fn hidden(&self) -> usize {
        self.encoder.hidden
    }

    pub fn check(&self) -> Result<()> {
        self.encoder.check()?;
        self.decoder.check()?;
        let (d, m) = (self.dim(), self.hidden());
        if self.decoder.in_dim != d || self.decoder.hidden != m {
            return Err(Error::shape(
                format!("decoder {d} -> {m}"),
                format!("{} -> {}", self.decoder.in_dim, self.decoder.hidden),
            ));
        }
        if self.proj_w.len() != d * m || self.proj_b.len() != d {
            return Err(Error::shape(
                format!("projection {d} x {m} + {d}"),
                format!("{} + {}", self.proj_w.len(), self.proj_b.len()),
            ));
        }
        if self.proj_w.iter().chain(&self.proj_b).any(|v| !v.is_finite()) {
            return Err(Error::InvalidArgument("non-finite projection weight".into()));
        }
        Ok(())
    }

    /// Parameter blocks in a fixed order, shared by the optimizer and the
    /// checkpoint format.
    pub fn blocks(&self) -> [&[f64]; 8] {
        [
            &self.encoder.w,
            &self.encoder.u,
            &self.encoder.b,
            &self.decoder.w,
            &self.decoder.u,
            &self.decoder.b,
            &self.proj_w,
            &self.proj_b,
        ]
    }

    pub fn blocks_mut(&mut self) -> [&mut [f64]; 8] {
        [
            &mut self.encoder.w,
            &mut self.encoder.u,
            &mut self.encoder.b,
            &mut self.decoder.w,
            &mut self.decoder.u,
            &mut self.decoder.b,
            &mut self.proj_w,
            &mut self.proj_b,
        ]
    }

    /// Adds `other` into `self` blockwise.
    pub fn accumulate(&mut self, other: &AutoencoderParams) {
        for (dst, src) in self.blocks_mut().into_iter().zip(other.blocks()) {
            dst.iter_mut().zip(src).for_each(|(d, s)| *d += s);
        }
    }

    fn check_window(&self, window: &[f64]) -> Result<usize> {
        let d = self.dim();
        if window.is_empty() || !window.len().is_multiple_of(d) {
            return Err(Error::shape(format!("window of L x {d} values"), window.len()));
        }
        Ok(window.len() / d)
    }

    fn run_encoder(&self, window: &[f64], steps: Option<&mut Vec<StepCache>>) -> Vec<f64> {
        let d = self.dim();
        let m = self.hidden();
        let mut h = vec![0.0; m];
        let mut c = vec![0.0; m];
        let mut steps = steps;
        for row in window.chunks_exact(d) {
            let cache = self.encoder.step(row, &h, &c);
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            if let Some(s) = steps.as_deref_mut() {
                s.push(cache);
            }
        }
        h
    }

    /// Final encoder hidden state for `window` (`L x d`).
    pub fn encode(&self, window: &[f64]) -> Result<Vec<f64>> {
        self.check_window(window)?;
        Ok(self.run_encoder(window, None))
    }

    /// Reconstructs `window` from hidden state `h`, teacher-forced on the
    /// window's own rows.
    pub fn decode(&self, h: &[f64], window: &[f64], order: DecoderOrder) -> Result<Vec<f64>> {
        self.check_window(window)?;
        if h.len() != self.hidden() {
            return Err(Error::shape(format!("hidden state of length {}", self.hidden()), h.len()));
        }
        Ok(self.run_decoder(h, window, order, None).1)
    }

    fn run_decoder(
        &self,
        h0: &[f64],
        window: &[f64],
        order: DecoderOrder,
        input_mask: Option<&[f64]>,
    ) -> (Vec<StepCache>, Vec<f64>) {
        let d = self.dim();
        let m = self.hidden();
        let len = window.len() / d;
        let mut h = h0.to_vec();
        let mut c = vec![0.0; m];
        let mut x = vec![0.0; d];
        let mut steps = Vec::with_capacity(len);
        let mut recon = vec![0.0; window.len()];
        for s in 0..len {
            if s > 0 {
                let prev = order.target(s - 1, len);
                x.copy_from_slice(&window[prev * d..(prev + 1) * d]);
                if let Some(mask) = input_mask {
                    x.iter_mut().zip(&mask[s * d..(s + 1) * d]).for_each(|(x, k)| *x *= k);
                }
            }
            let cache = self.decoder.step(&x, &h, &c);
            let row = order.target(s, len);
            for (j, out) in recon[row * d..(row + 1) * d].iter_mut().enumerate() {
                let w_row = &self.proj_w[j * m..(j + 1) * m];
                *out = self.proj_b[j] + w_row.iter().zip(&cache.h).map(|(w, h)| w * h).sum::<f64>();
            }
            h.clone_from(&cache.h);
            c.clone_from(&cache.c);
            steps.push(cache);
        }
        (steps, recon)
    }

    /// Full forward pass with caches. `decoder_input_mask`, when given, is
    /// an `L x d` dropout mask applied to decoder step inputs (row `s` for
    /// step `s`).
    pub fn forward(
        &self,
        window: &[f64],
        order: DecoderOrder,
        decoder_input_mask: Option<&[f64]>,
    ) -> Result<ForwardPass> {
        self.check_window(window)?;
        if let Some(mask) = decoder_input_mask {
            if mask.len() != window.len() {
                return Err(Error::shape(format!("mask of length {}", window.len()), mask.len()));
            }
        }
        let mut encoder_steps = Vec::with_capacity(window.len() / self.dim());
        let embedding = self.run_encoder(window, Some(&mut encoder_steps));
        let (decoder_steps, reconstruction) =
            self.run_decoder(&embedding, window, order, decoder_input_mask);
        Ok(ForwardPass {
            encoder_steps,
            decoder_steps,
            order,
            embedding,
            reconstruction,
        })
    }

    /// Exact gradients of a scalar loss, given its gradient with respect to
    /// the reconstruction and (optionally) the embedding.
    pub fn backward(&self, pass: &ForwardPass, upstream: &Upstream<'_>) -> Result<AutoencoderParams> {
        let mut grads = AutoencoderParams::zeros(self.dim(), self.hidden());
        self.backward_into(pass, upstream, &mut grads)?;
        Ok(grads)
    }

    /// As [`backward`](Self::backward), accumulating into `grads`.
    pub fn backward_into(
        &self,
        pass: &ForwardPass,
        upstream: &Upstream<'_>,
        grads: &mut AutoencoderParams,
    ) -> Result<()> {
        let d = self.dim();
        let m = self.hidden();
        let len = pass.decoder_steps.len();
        if upstream.reconstruction.len() != len * d {
            return Err(Error::shape(
                format!("reconstruction gradient of length {}", len * d),
                upstream.reconstruction.len(),
            ));
        }
        if let Some(e) = upstream.embedding {
            if e.len() != m {
                return Err(Error::shape(format!("embedding gradient of length {m}"), e.len()));
            }
        }

        let mut dh = vec![0.0; m];
        let mut dc = vec![0.0; m];
        let mut dh_prev = vec![0.0; m];
        let mut dc_prev = vec![0.0; m];
        let mut dh_total = vec![0.0; m];
        for s in (0..len).rev() {
            let cache = &pass.decoder_steps[s];
            let row = pass.order.target(s, len);
            let dout = &upstream.reconstruction[row * d..(row + 1) * d];
            dh_total.copy_from_slice(&dh);
            for (j, &g) in dout.iter().enumerate() {
                if g == 0.0 {
                    continue;
                }
                grads.proj_b[j] += g;
                let gw = &mut grads.proj_w[j * m..(j + 1) * m];
                gw.iter_mut().zip(&cache.h).for_each(|(gw, h)| *gw += g * h);
                let w_row = &self.proj_w[j * m..(j + 1) * m];
                dh_total.iter_mut().zip(w_row).for_each(|(dh, w)| *dh += g * w);
            }
            self.decoder
                .step_backward(cache, &dh_total, &dc, &mut grads.decoder, &mut dh_prev, &mut dc_prev);
            std::mem::swap(&mut dh, &mut dh_prev);
            std::mem::swap(&mut dc, &mut dc_prev);
        }

        // dh now holds the gradient on the decoder's initial hidden state,
        // which is the embedding; the initial cell state is constant.
        if let Some(e) = upstream.embedding {
            dh.iter_mut().zip(e).for_each(|(d, e)| *d += e);
        }
        dc.iter_mut().for_each(|v| *v = 0.0);
        for cache in pass.encoder_steps.iter().rev() {
            self.encoder
                .step_backward(cache, &dh, &dc, &mut grads.encoder, &mut dh_prev, &mut dc_prev);
            std::mem::swap(&mut dh, &mut dh_prev);
            std::mem::swap(&mut dc, &mut dc_prev);
        }
        Ok(())
    }
}

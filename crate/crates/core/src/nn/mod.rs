//! Neural network building blocks: LSTM cell, encoder/decoder, Adam,
//! dropout and finite-difference gradient checking.

pub mod adam;
pub mod autoencoder;
pub mod dropout;
pub mod gradcheck;
pub mod lstm;

pub use adam::{AdamConfig, AdamState};
pub use autoencoder::{AutoencoderParams, DecoderOrder, ForwardPass, Upstream};
pub use dropout::{dropout_mask, Mode};
pub use lstm::{lstm_step, LstmParams, GATE_ORDER};

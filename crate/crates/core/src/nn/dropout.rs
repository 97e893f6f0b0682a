use rand::Rng;

/// Whether stochastic layers are active.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Inverted-dropout mask: each entry is 0 with probability `rate`, else
/// `1 / (1 - rate)`. Evaluation mode (or `rate == 0`) yields all ones.
pub fn dropout_mask(len: usize, rate: f64, mode: Mode, rng: &mut impl Rng) -> Vec<f64> {
    assert!((0.0..1.0).contains(&rate), "dropout rate {rate} outside [0, 1)");
    if mode == Mode::Eval || rate == 0.0 {
        return vec![1.0; len];
    }
    let keep = 1.0 / (1.0 - rate);
    (0..len)
        .map(|_| if rng.gen::<f64>() < rate { 0.0 } else { keep })
        .collect()
}

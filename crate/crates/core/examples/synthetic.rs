//! Trains on the synthetic sine benchmark and prints window-level AUC.
//!
//! `cargo run --release -p protoad-core --example synthetic -- [seed] [m] [alpha_min] [epochs]`

use protoad_core::data::{generate_synthetic, SyntheticConfig};
use protoad_core::{fit_detector, score_series, TrainConfig};

fn main() -> protoad_core::Result<()> {
    let args: Vec<String> = std::env::args().skip(1).collect();
    let arg = |i: usize, default: &str| args.get(i).cloned().unwrap_or_else(|| default.to_string());
    let seed: u64 = arg(0, "0").parse().unwrap();
    let data_cfg = SyntheticConfig {
        seed,
        alpha_min: arg(2, "0").parse().unwrap(),
        alpha_max: arg(4, "1").parse().unwrap(),
        ..Default::default()
    };
    let (train, test) = generate_synthetic(&data_cfg)?;
    let cfg = TrainConfig {
        seed,
        m: arg(1, "64").parse().unwrap(),
        epochs: arg(3, "100").parse().unwrap(),
        ..Default::default()
    };
    let start = std::time::Instant::now();
    let (model, report) = fit_detector(&train, &cfg)?;
    let first = &report.epochs[0].loss;
    let last = &report.epochs.last().unwrap().loss;
    println!("epoch 1: {first:?}");
    println!("epoch {}: {last:?}", report.epochs.len());
    let scores = score_series(&model, &test, cfg.score_mode)?;
    println!(
        "AUC {:.4} ({} windows, {} anomalous), {:.1}s total, {:.3}s/epoch",
        scores.auc()?,
        scores.window_scores.len(),
        scores.labels.iter().filter(|&&l| l == 1).count(),
        start.elapsed().as_secs_f64(),
        report.mean_epoch_seconds()
    );
    Ok(())
}

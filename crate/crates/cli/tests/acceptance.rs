//! Acceptance gate. Each test checks one criterion and prints a single
//! `PASS`/`FAIL` line; the tests share one lock so timings are not skewed by
//! concurrent training runs.
//!
//! Run with `cargo test -p protoad-cli --test acceptance -- --nocapture` to
//! see per-seed detail.

#![allow(clippy::needless_range_loop)]

use std::io::Write;
use std::path::Path;
use std::process::Command;
use std::sync::{Mutex, MutexGuard, OnceLock};

use protoad_core::nn::gradcheck::{central_difference, RELATIVE_FLOOR};
use protoad_core::nn::LstmParams;
use protoad_core::prototype::squared_distance;
use protoad_core::trainer::BatchDropout;
use protoad_core::{
    auc, fit_detector, generate_synthetic, load_csv, make_windows, model_windows,
    objective_and_gradients, project_prototypes, score_series, score_windows, total_loss, train,
    CsvOptions, DecoderOrder, ErrorDistribution, Normalizer, ProtoADModel, PrototypeLayer,
    ScoreMode, SeriesDataset, SyntheticConfig, TrainConfig, TrainReport,
};
use rand::rngs::StdRng;
use rand::{Rng, SeedableRng};

static LOCK: Mutex<()> = Mutex::new(());

fn serial() -> MutexGuard<'static, ()> {
    LOCK.lock().unwrap_or_else(|e| e.into_inner())
}

/// Prints the verdict line past the test harness's output capture.
fn verdict(id: u32, name: &str, pass: bool, detail: &str) {
    let tag = if pass { "PASS" } else { "FAIL" };
    let mut out = std::io::stdout().lock();
    writeln!(out, "[acceptance {id}] {tag} {name}: {detail}").unwrap();
}

fn note(text: &str) {
    let mut out = std::io::stdout().lock();
    writeln!(out, "    {text}").unwrap();
}

fn close(a: f64, b: f64) -> bool {
    (a - b).abs() <= 1e-12 * a.abs().max(b.abs()).max(1.0)
}

// ---------------------------------------------------------------------------
// Independent reference implementations.

fn sigmoid(x: f64) -> f64 {
    1.0 / (1.0 + (-x).exp())
}

fn lstm_step(p: &LstmParams, x: &[f64], h: &[f64], c: &[f64]) -> (Vec<f64>, Vec<f64>) {
    let (m, n) = (p.hidden, p.in_dim);
    let pre = |r: usize| {
        let mut a = p.b[r];
        for q in 0..n {
            a += p.w[r * n + q] * x[q];
        }
        for q in 0..m {
            a += p.u[r * m + q] * h[q];
        }
        a
    };
    let mut h_next = vec![0.0; m];
    let mut c_next = vec![0.0; m];
    for j in 0..m {
        let i = sigmoid(pre(j));
        let f = sigmoid(pre(m + j));
        let g = pre(2 * m + j).tanh();
        let o = sigmoid(pre(3 * m + j));
        c_next[j] = f * c[j] + i * g;
        h_next[j] = o * c_next[j].tanh();
    }
    (h_next, c_next)
}

/// Encoder final state, then a teacher-forced decoder from that state.
fn reference_reconstruction(model: &ProtoADModel, window: &[f64]) -> Vec<f64> {
    let p = &model.params;
    let d = p.proj_b.len();
    let m = p.encoder.hidden;
    let len = window.len() / d;
    let (mut h, mut c) = (vec![0.0; m], vec![0.0; m]);
    for t in 0..len {
        (h, c) = lstm_step(&p.encoder, &window[t * d..(t + 1) * d], &h, &c);
    }
    let target = |s: usize| match model.config.decoder_order {
        DecoderOrder::Forward => s,
        DecoderOrder::Reversed => len - 1 - s,
    };
    let mut c = vec![0.0; m];
    let mut out = vec![0.0; window.len()];
    for s in 0..len {
        let x: Vec<f64> = if s == 0 {
            vec![0.0; d]
        } else {
            window[target(s - 1) * d..(target(s - 1) + 1) * d].to_vec()
        };
        (h, c) = lstm_step(&p.decoder, &x, &h, &c);
        let row = target(s);
        for j in 0..d {
            let mut v = p.proj_b[j];
            for q in 0..m {
                v += p.proj_w[j * m + q] * h[q];
            }
            out[row * d + j] = v;
        }
    }
    out
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    let mut s = 0.0;
    for i in 0..a.len() {
        s += (a[i] - b[i]) * (a[i] - b[i]);
    }
    s
}

fn reference_diversity(protos: &[Vec<f64>], d_min: f64) -> f64 {
    let mut ordered = 0.0;
    for i in 0..protos.len() {
        for j in 0..protos.len() {
            if i != j {
                let gap = d_min - sq_dist(&protos[i], &protos[j]);
                ordered += if gap > 0.0 { gap * gap } else { 0.0 };
            }
        }
    }
    ordered / 2.0
}

fn reference_representation(protos: &[Vec<f64>], hidden: &[Vec<f64>]) -> f64 {
    if protos.is_empty() || hidden.is_empty() {
        return 0.0;
    }
    let mut to_data = 0.0;
    for p in protos {
        to_data += hidden
            .iter()
            .map(|h| sq_dist(p, h))
            .fold(f64::INFINITY, f64::min);
    }
    let mut to_protos = 0.0;
    for h in hidden {
        to_protos += protos
            .iter()
            .map(|p| sq_dist(p, h))
            .fold(f64::INFINITY, f64::min);
    }
    to_data / protos.len() as f64 + to_protos / hidden.len() as f64
}

/// Mean and ridged sample covariance of `errors`.
fn reference_moments(errors: &[Vec<f64>]) -> (Vec<f64>, Vec<Vec<f64>>) {
    let d = errors[0].len();
    let n = errors.len() as f64;
    let mean: Vec<f64> = (0..d)
        .map(|a| errors.iter().map(|e| e[a]).sum::<f64>() / n)
        .collect();
    let mut cov = vec![vec![0.0; d]; d];
    for a in 0..d {
        for b in 0..d {
            let s: f64 = errors
                .iter()
                .map(|e| (e[a] - mean[a]) * (e[b] - mean[b]))
                .sum();
            cov[a][b] = s / (n - 1.0) + if a == b { 1e-6 } else { 0.0 };
        }
    }
    (mean, cov)
}

/// `diff^T cov^{-1} diff` by Gaussian elimination with partial pivoting.
fn reference_mahalanobis(mean: &[f64], cov: &[Vec<f64>], e: &[f64]) -> f64 {
    let d = mean.len();
    let diff: Vec<f64> = (0..d).map(|a| e[a] - mean[a]).collect();
    let mut a: Vec<Vec<f64>> = cov.to_vec();
    let mut y = diff.clone();
    for col in 0..d {
        let pivot = (col..d)
            .max_by(|&i, &j| a[i][col].abs().total_cmp(&a[j][col].abs()))
            .unwrap();
        a.swap(col, pivot);
        y.swap(col, pivot);
        for row in col + 1..d {
            let f = a[row][col] / a[col][col];
            for k in col..d {
                a[row][k] -= f * a[col][k];
            }
            y[row] -= f * y[col];
        }
    }
    let mut x = vec![0.0; d];
    for row in (0..d).rev() {
        let mut s = y[row];
        for k in row + 1..d {
            s -= a[row][k] * x[k];
        }
        x[row] = s / a[row][row];
    }
    diff.iter().zip(&x).map(|(a, b)| a * b).sum()
}

fn reference_auc(scores: &[f64], labels: &[u8]) -> f64 {
    let mut wins = 0.0;
    let mut pairs = 0.0;
    for (i, &si) in scores.iter().enumerate() {
        for (j, &sj) in scores.iter().enumerate() {
            if labels[i] == 1 && labels[j] == 0 {
                pairs += 1.0;
                if si > sj {
                    wins += 1.0;
                } else if si == sj {
                    wins += 0.5;
                }
            }
        }
    }
    wins / pairs
}

// ---------------------------------------------------------------------------
// Shared helpers.

fn flatten(params: &protoad_core::nn::AutoencoderParams, prototypes: &[f64]) -> Vec<f64> {
    let mut theta: Vec<f64> = params
        .blocks()
        .iter()
        .flat_map(|b| b.iter().copied())
        .collect();
    theta.extend_from_slice(prototypes);
    theta
}

fn unflatten(model: &mut ProtoADModel, theta: &[f64]) {
    let mut at = 0;
    for block in model.params.blocks_mut() {
        let n = block.len();
        block.copy_from_slice(&theta[at..at + n]);
        at += n;
    }
    model.prototypes.values.copy_from_slice(&theta[at..]);
}

fn random_windows(rng: &mut StdRng, n: usize, values: usize) -> Vec<Vec<f64>> {
    (0..n)
        .map(|_| (0..values).map(|_| rng.gen_range(-2.0..2.0)).collect())
        .collect()
}

fn small_model(
    rng: &mut StdRng,
    seed: u64,
    k: usize,
    m: usize,
    len: usize,
    d: usize,
) -> ProtoADModel {
    let cfg = TrainConfig {
        k,
        m,
        window_length: len,
        seed,
        lambda_e: rng.gen_range(0.01..1.0),
        lambda_d: rng.gen_range(0.01..1.0),
        lambda_r: rng.gen_range(0.01..1.0),
        d_min: rng.gen_range(0.5..6.0),
        decoder_order: if rng.gen_bool(0.5) {
            DecoderOrder::Reversed
        } else {
            DecoderOrder::Forward
        },
        ..TrainConfig::default()
    };
    ProtoADModel::initialize(&cfg, d).unwrap()
}

// ---------------------------------------------------------------------------

#[test]
fn criterion_1_gradient_correctness() {
    let _guard = serial();
    let start = std::time::Instant::now();
    let mut rng = StdRng::seed_from_u64(0xC1);
    let mut worst = 0.0f64;
    let instances = 40;
    for case in 0..instances {
        let len = rng.gen_range(1..=4);
        let d = rng.gen_range(1..=3);
        let m = rng.gen_range(1..=6);
        let k = if case < 4 {
            case % 2
        } else {
            rng.gen_range(0..=3)
        };
        let model = small_model(&mut rng, case as u64, k, m, len, d);
        let batch_size = rng.gen_range(1..=4);
        let windows = random_windows(&mut rng, batch_size, len * d);
        let batch: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        let masks = (case % 2 == 1).then(|| BatchDropout {
            decoder_inputs: (0..batch_size)
                .map(|_| {
                    (0..len * d)
                        .map(|_| if rng.gen_bool(0.2) { 0.0 } else { 1.25 })
                        .collect()
                })
                .collect(),
            embeddings: if k > 0 {
                (0..batch_size)
                    .map(|_| {
                        (0..m)
                            .map(|_| if rng.gen_bool(0.2) { 0.0 } else { 1.25 })
                            .collect()
                    })
                    .collect()
            } else {
                Vec::new()
            },
        });

        let (loss, grads) = objective_and_gradients(&model, &batch, masks.as_ref()).unwrap();
        let analytic = flatten(&grads.autoencoder, &grads.prototypes);
        let mut theta = flatten(&model.params, &model.prototypes.values);
        let numeric = central_difference(&mut theta, 1e-5, |t| {
            let mut probe = model.clone();
            unflatten(&mut probe, t);
            objective_and_gradients(&probe, &batch, masks.as_ref())
                .unwrap()
                .0
                .total
        });
        // Central differences carry round-off of order eps * |L| / step, so
        // entries are compared relatively only above a floor scaled by |L|.
        let floor = RELATIVE_FLOOR * loss.total.abs().max(1.0);
        let err = analytic
            .iter()
            .zip(&numeric)
            .map(|(a, n)| (a - n).abs() / a.abs().max(n.abs()).max(floor))
            .fold(0.0, f64::max);
        if err >= 1e-4 {
            note(&format!(
                "instance {case}: L={len} d={d} m={m} k={k} max relative error {err:.3e}"
            ));
        }
        worst = worst.max(err);
    }
    let secs = start.elapsed().as_secs_f64();
    let pass = worst < 1e-4 && secs < 60.0;
    verdict(
        1,
        "gradient correctness",
        pass,
        &format!("{instances} instances, max relative error {worst:.3e} (< 1e-4), {secs:.1}s"),
    );
    assert!(pass);
}

#[test]
fn criterion_2_loss_oracles() {
    let _guard = serial();
    let mut rng = StdRng::seed_from_u64(0xC2);
    let cases = 150;
    let mut failures: Vec<String> = Vec::new();
    let check = |failures: &mut Vec<String>, what: &str, case: usize, got: f64, want: f64| {
        if !close(got, want) {
            failures.push(format!("{what} case {case}: {got} vs {want}"));
        }
    };

    for case in 0..cases {
        // Prototype losses.
        let k = rng.gen_range(0..=6);
        let m = rng.gen_range(1..=5);
        let d_min = rng.gen_range(0.1..4.0);
        let protos: Vec<Vec<f64>> = (0..k)
            .map(|_| (0..m).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let layer = PrototypeLayer {
            k,
            m,
            d_min,
            values: protos.concat(),
        };
        let n = rng.gen_range(1..=8);
        let hidden: Vec<Vec<f64>> = (0..n)
            .map(|_| (0..m).map(|_| rng.gen_range(-1.5..1.5)).collect())
            .collect();
        check(
            &mut failures,
            "diversity_loss",
            case,
            layer.diversity_loss(),
            reference_diversity(&protos, d_min),
        );
        check(
            &mut failures,
            "representation_loss",
            case,
            layer.representation_loss(&hidden),
            reference_representation(&protos, &hidden),
        );

        // Reconstruction loss.
        let len = rng.gen_range(1..=5);
        let d = rng.gen_range(1..=3);
        let hidden_size = rng.gen_range(1..=5);
        let model = small_model(&mut rng, case as u64, 0, hidden_size, len, d);
        let count = rng.gen_range(1..=5);
        let windows = random_windows(&mut rng, count, len * d);
        let batch: Vec<&[f64]> = windows.iter().map(Vec::as_slice).collect();
        let want = windows
            .iter()
            .map(|w| {
                let r = reference_reconstruction(&model, w);
                w.iter().zip(&r).map(|(x, r)| (x - r).abs()).sum::<f64>()
            })
            .sum::<f64>()
            / windows.len() as f64;
        check(
            &mut failures,
            "L_e",
            case,
            total_loss(&model, &batch).unwrap().reconstruction,
            want,
        );

        // Point scores.
        let errors: Vec<Vec<f64>> = (0..rng.gen_range(d + 1..=20))
            .map(|_| (0..d).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let dist = ErrorDistribution::fit(&errors).unwrap();
        let (mean, cov) = reference_moments(&errors);
        let probe: Vec<f64> = (0..d).map(|_| rng.gen_range(0.0..2.0)).collect();
        check(
            &mut failures,
            "point_score",
            case,
            dist.point_score(&probe, ScoreMode::Mahalanobis),
            reference_mahalanobis(&mean, &cov, &probe),
        );
        if d == 1 {
            let var = cov[0][0];
            let z = probe[0] - mean[0];
            let density =
                (-(z * z) / (2.0 * var)).exp() / (2.0 * std::f64::consts::PI * var).sqrt();
            check(
                &mut failures,
                "point_score density",
                case,
                dist.point_score(&probe, ScoreMode::PaperDensity),
                density,
            );
        }

        // Window scores over a possibly overlapping tiling.
        let total = rng.gen_range(len..=len + 25);
        let stride = rng.gen_range(1..=len + 1);
        let values: Vec<f64> = (0..total * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let labels: Vec<u8> = (0..total).map(|_| rng.gen_bool(0.1) as u8).collect();
        let columns = (0..d).map(|j| format!("dim_{j}")).collect();
        let series = SeriesDataset::new("oracle", columns, values.clone(), labels).unwrap();
        let windows = make_windows(&series, len, stride).unwrap();
        let mut model = model;
        model.error_distribution = Some(dist);
        let scored = score_windows(&model, &windows, ScoreMode::Mahalanobis).unwrap();
        let origins: Vec<usize> = (0..)
            .map(|i| i * stride)
            .take_while(|o| o + len <= total)
            .collect();
        let mut point = vec![f64::NEG_INFINITY; total];
        for &o in &origins {
            let w = &values[o * d..(o + len) * d];
            let r = reference_reconstruction(&model, w);
            for t in 0..len {
                let e: Vec<f64> = (0..d)
                    .map(|j| (w[t * d + j] - r[t * d + j]).abs())
                    .collect();
                let s = reference_mahalanobis(&mean, &cov, &e);
                point[o + t] = point[o + t].max(s);
            }
        }
        if scored.origins != origins {
            failures.push(format!("window origins case {case}"));
        }
        for (i, &o) in origins.iter().enumerate() {
            let want = point[o..o + len]
                .iter()
                .copied()
                .fold(f64::NEG_INFINITY, f64::max);
            check(
                &mut failures,
                "window_scores",
                case,
                scored.window_scores[i],
                want,
            );
        }

        // AUC with ties.
        let n = rng.gen_range(2..=30);
        let mut labels: Vec<u8> = (0..n).map(|_| rng.gen_bool(0.4) as u8).collect();
        labels[0] = 1;
        labels[1] = 0;
        let scores: Vec<f64> = if case % 2 == 0 {
            (0..n).map(|_| rng.gen_range(0..5) as f64).collect()
        } else {
            (0..n).map(|_| rng.gen_range(-1.0..1.0)).collect()
        };
        check(
            &mut failures,
            "auc",
            case,
            auc(&scores, &labels).unwrap(),
            reference_auc(&scores, &labels),
        );
    }
    for f in failures.iter().take(10) {
        note(f);
    }
    let pass = failures.is_empty();
    verdict(
        2,
        "loss oracles",
        pass,
        &format!(
            "{cases} cases each of diversity, representation, L_e, point score, window scores, AUC; {} mismatches at 1e-12",
            failures.len()
        ),
    );
    assert!(pass);
}

struct SyntheticRun {
    seed: u64,
    train: SeriesDataset,
    model: ProtoADModel,
    report: TrainReport,
    auc: f64,
}

fn synthetic_run(seed: u64, alpha_min: f64) -> SyntheticRun {
    let data = SyntheticConfig {
        seed,
        alpha_min,
        ..SyntheticConfig::default()
    };
    let (train, test) = generate_synthetic(&data).unwrap();
    let cfg = TrainConfig {
        seed,
        ..TrainConfig::default()
    };
    let (model, report) = fit_detector(&train, &cfg).unwrap();
    let auc = score_series(&model, &test, cfg.score_mode)
        .unwrap()
        .auc()
        .unwrap();
    SyntheticRun {
        seed,
        train,
        model,
        report,
        auc,
    }
}

const SEEDS: [u64; 3] = [0, 1, 2];

fn default_runs() -> &'static [SyntheticRun] {
    static RUNS: OnceLock<Vec<SyntheticRun>> = OnceLock::new();
    RUNS.get_or_init(|| SEEDS.iter().map(|&s| synthetic_run(s, 0.0)).collect())
}

#[test]
fn criterion_3_synthetic_pipeline() {
    let _guard = serial();
    let mut trained = true;
    let mut in_band = true;
    for run in default_runs() {
        let r = &run.report;
        let first = r.epochs.first().unwrap().loss.reconstruction;
        let last = r.epochs.last().unwrap().loss.reconstruction;
        let finite = r.epochs.iter().all(|e| e.loss.is_finite_non_negative());
        let ok = r.epochs.len() == 100 && last < first && finite;
        trained &= ok;
        in_band &= (0.45..=0.75).contains(&run.auc);
        note(&format!(
            "seed {}: {} epochs, L_e {first:.4} -> {last:.4}, finite {finite}, AUC {:.4} (alpha in [0, 1]), {:.3}s/epoch",
            run.seed,
            r.epochs.len(),
            run.auc,
            r.mean_epoch_seconds()
        ));
    }
    let mut strong = true;
    for &seed in &SEEDS {
        let run = synthetic_run(seed, 0.5);
        strong &= run.auc > 0.90;
        note(&format!(
            "seed {seed}: AUC {:.4} (alpha in [0.5, 1])",
            run.auc
        ));
    }
    let aucs: Vec<String> = default_runs()
        .iter()
        .map(|r| format!("{:.3}", r.auc))
        .collect();
    let pass = trained && in_band && strong;
    verdict(
        3,
        "synthetic pipeline",
        pass,
        &format!(
            "training ok {trained}; AUC [{}] in [0.45, 0.75] {in_band}; alpha in [0.5, 1] AUC > 0.90 {strong}",
            aucs.join(", ")
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_4_encdecad_reduction() {
    let _guard = serial();
    let (train, _) = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let base = TrainConfig {
        epochs: 20,
        ..TrainConfig::default()
    };
    let baseline = TrainConfig {
        k: 0,
        ..base.clone()
    };
    let frozen = TrainConfig {
        k: 10,
        lambda_d: 0.0,
        lambda_r: 0.0,
        ..base
    };
    let (_, a) = fit_detector(&train, &baseline).unwrap();
    let (_, b) = fit_detector(&train, &frozen).unwrap();
    let bits = |r: &TrainReport| -> Vec<u64> {
        r.reconstruction_trajectory()
            .iter()
            .map(|v| v.to_bits())
            .collect()
    };
    let pass = bits(&a) == bits(&b) && a.epochs.len() == 20;
    verdict(
        4,
        "EncDecAD reduction",
        pass,
        &format!(
            "k=0 vs k=10 with zero prototype weights over {} epochs: trajectories bit-identical {}",
            a.epochs.len(),
            bits(&a) == bits(&b)
        ),
    );
    assert!(pass);
}

fn nearest_distances(model: &ProtoADModel, embeddings: &[Vec<f64>]) -> Vec<f64> {
    (0..model.prototypes.k)
        .map(|j| {
            let p = model.prototypes.prototype(j);
            embeddings
                .iter()
                .map(|h| squared_distance(p, h))
                .fold(f64::INFINITY, f64::min)
        })
        .collect()
}

#[test]
fn criterion_5_prototype_quality() {
    let _guard = serial();
    let run = &default_runs()[0];
    let trained = &run.model;
    let init = ProtoADModel::initialize(&trained.config, trained.dim()).unwrap();
    let windows = model_windows(trained, &run.train).unwrap();
    let embed = |m: &ProtoADModel| -> Vec<Vec<f64>> {
        windows
            .windows
            .iter()
            .map(|w| m.embed(w).unwrap())
            .collect()
    };

    let (ld0, ld1) = (
        init.prototypes.diversity_loss(),
        trained.prototypes.diversity_loss(),
    );
    let diversity_ok = ld1 == 0.0 || ld1 * 10.0 <= ld0;
    let before = nearest_distances(&init, &embed(&init));
    let after = nearest_distances(trained, &embed(trained));
    let closer = before.iter().zip(&after).all(|(b, a)| a < b);
    let projections = project_prototypes(trained, &windows).unwrap();
    let mut origins: Vec<usize> = projections.iter().map(|p| p.origin).collect();
    origins.sort_unstable();
    origins.dedup();
    let distinct =
        projections.len() == trained.prototypes.k && origins.len() == trained.prototypes.k;
    for (j, (b, a)) in before.iter().zip(&after).enumerate() {
        note(&format!(
            "prototype {j}: nearest squared distance {b:.4} -> {a:.4}"
        ));
    }
    let pass = diversity_ok && closer && distinct;
    verdict(
        5,
        "prototype quality",
        pass,
        &format!(
            "L_d {ld0:.4} -> {ld1:.4} ok {diversity_ok}; all nearest distances decreased {closer}; {} distinct projections of {}",
            origins.len(),
            trained.prototypes.k
        ),
    );
    assert!(pass);
}

#[test]
fn criterion_6_efficiency() {
    let _guard = serial();
    let (train, _) = generate_synthetic(&SyntheticConfig::default()).unwrap();
    let base = TrainConfig {
        epochs: 10,
        ..TrainConfig::default()
    };
    let (mut plain, mut with_protos) = (Vec::new(), Vec::new());
    for _ in 0..3 {
        let (_, r0) = fit_detector(
            &train,
            &TrainConfig {
                k: 0,
                ..base.clone()
            },
        )
        .unwrap();
        plain.push(r0.mean_epoch_seconds());
        let (_, r50) = fit_detector(
            &train,
            &TrainConfig {
                k: 50,
                ..base.clone()
            },
        )
        .unwrap();
        with_protos.push(r50.mean_epoch_seconds());
    }
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (t0, t50) = (mean(&plain), mean(&with_protos));
    let ratio = t50 / t0;
    let pass = ratio < 1.2;
    verdict(
        6,
        "efficiency",
        pass,
        &format!("mean epoch {t0:.4}s at k=0, {t50:.4}s at k=50, ratio {ratio:.3} (< 1.2)"),
    );
    assert!(pass);
}

fn cli(args: &[&str]) {
    let out = Command::new(env!("CARGO_BIN_EXE_protoad"))
        .args(args)
        .output()
        .expect("spawn protoad");
    assert!(
        out.status.success(),
        "protoad {args:?}: {}",
        String::from_utf8_lossy(&out.stderr)
    );
}

fn cli_pipeline(root: &Path) {
    let s = |p: &Path| p.to_str().unwrap().to_string();
    let (gen, tr, sc) = (
        root.join("generate"),
        root.join("train"),
        root.join("score"),
    );
    cli(&["generate", "--output-dir", &s(&gen), "--seed", "7"]);
    cli(&[
        "train",
        "--input",
        &s(&gen.join("train.csv")),
        "--output-dir",
        &s(&tr),
        "--seed",
        "7",
        "--epochs",
        "3",
    ]);
    cli(&[
        "score",
        "--input",
        &s(&gen.join("test.csv")),
        "--checkpoint",
        &s(&tr.join("checkpoint.json")),
        "--output-dir",
        &s(&sc),
    ]);
}

#[test]
fn criterion_7_determinism() {
    let _guard = serial();
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    cli_pipeline(a.path());
    cli_pipeline(b.path());
    let files = [
        "generate/train.csv",
        "generate/test.csv",
        "generate/manifest.json",
        "train/checkpoint.json",
        "train/manifest.json",
        "score/scores.csv",
        "score/manifest.json",
    ];
    let mut differing = Vec::new();
    for f in files {
        let x = std::fs::read(a.path().join(f)).unwrap();
        let y = std::fs::read(b.path().join(f)).unwrap();
        if x != y {
            differing.push(f);
        }
    }
    let pass = differing.is_empty();
    verdict(
        7,
        "determinism",
        pass,
        &format!(
            "{} artifacts compared across two runs, differing: {differing:?}",
            files.len()
        ),
    );
    assert!(pass);
}

/// Expects a CSV with a `value` column, a 0/1 `label` column and an ignored
/// `timestamp` column at 30-minute resolution.
#[test]
fn criterion_8_taxi_optional() {
    let _guard = serial();
    let Ok(path) = std::env::var("PROTOAD_TAXI_CSV") else {
        let mut out = std::io::stdout().lock();
        writeln!(out, "[acceptance 8] SKIP taxi: PROTOAD_TAXI_CSV not set").unwrap();
        return;
    };
    let options = CsvOptions {
        label_column: Some("label".into()),
        ignore_columns: vec!["timestamp".into()],
    };
    let series = load_csv(&path, &options).unwrap();
    let half = series.len() / 2;
    let split = |range: std::ops::Range<usize>| {
        SeriesDataset::new(
            "taxi",
            series.columns.clone(),
            series.values[range.start * series.dim..range.end * series.dim].to_vec(),
            series.labels[range].to_vec(),
        )
        .unwrap()
    };
    let (train_part, test_part) = (split(0..half), split(half..series.len()));
    let cfg = TrainConfig {
        window_length: 48,
        ..TrainConfig::default()
    };
    let normalizer = Normalizer::fit(&train_part).unwrap();
    let windows = make_windows(&normalizer.apply(&train_part).unwrap(), 48, 48).unwrap();
    let regular: Vec<usize> = (0..windows.len())
        .filter(|&i| windows.labels[i] == 0)
        .collect();
    let (mut model, _) = train(&windows.select(&regular), &cfg).unwrap();
    model.normalizer = Some(normalizer);
    let value = score_series(&model, &test_part, cfg.score_mode)
        .unwrap()
        .auc()
        .unwrap();
    let pass = (value - 0.63).abs() <= 0.10;
    verdict(
        8,
        "taxi (non-blocking)",
        pass,
        &format!("AUC {value:.4}, target 0.63 +/- 0.10"),
    );
}

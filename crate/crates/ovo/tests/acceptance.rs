//! Acceptance suite: one test per headline guarantee of the crate.
//!
//! Each test prints a single `criterion NN PASS` line with the measured
//! values (visible with `--nocapture`); a failed assertion marks the
//! corresponding criterion as failed.

use std::process::Command;
use std::time::Instant;

use ovo_attention::attention::{ovo_context, ovo_score};
use ovo_attention::flops::{self, FlopCounter};
use ovo_attention::fusion::{grad_check, FusionConfig, FusionModel, Scheme};
use ovo_attention::numerics::{Matrix, Rng};
use ovo_attention::simdata::{self, SimConfig};
use ovo_attention::train::{self, TrainConfig};

fn bench_config() -> (u64, u64, u64) {
    (4, 16, 2) // (n, d, h) shared by the scaling-law and ordering criteria
}

/// Criterion 1: log-log slope of delta-FLOPs vs k in {2,5,10,15,20} is
/// 1.0 +/- 0.1 for OvO, within [1.8, 2.05] for early-self and [1.7, 2.05]
/// for cross-attention, measured through the actual `bench` subcommand.
#[test]
fn criterion_01_scaling_law_slopes() {
    let start = Instant::now();
    let dir = tempfile::tempdir().unwrap();
    let status = Command::new(env!("CARGO_BIN_EXE_ovo"))
        .args([
            "bench",
            "--k-list",
            "2,5,10,15,20",
            "--n",
            "4",
            "--d",
            "16",
            "--h",
            "2",
            "--out",
        ])
        .arg(dir.path())
        .status()
        .unwrap();
    assert!(status.success(), "bench subcommand failed");

    // Parse delta_flops per scheme back out of the emitted CSV.
    let csv = std::fs::read_to_string(dir.path().join("bench.csv")).unwrap();
    let mut lines = csv.lines();
    assert_eq!(
        lines.next().unwrap(),
        "scheme,k,n,d,h,flops_analytic,flops_measured,delta_flops,wall_ns"
    );
    let slope_of = |scheme: &str| {
        let pts: Vec<(f64, f64)> = csv
            .lines()
            .skip(1)
            .map(|l| l.split(',').collect::<Vec<_>>())
            .filter(|f| f[0] == scheme)
            .map(|f| (f[1].parse::<f64>().unwrap(), f[7].parse::<f64>().unwrap()))
            .collect();
        assert_eq!(pts.len(), 5, "expected 5 bench rows for {scheme}");
        flops::log_log_slope(&pts)
    };
    let ovo = slope_of("ovo");
    let cross = slope_of("cross-pairwise");
    let es = slope_of("early-self");
    assert!((0.9..=1.1).contains(&ovo), "ovo slope {ovo} outside 1.0 +/- 0.1");
    assert!((1.8..=2.05).contains(&es), "early-self slope {es} outside [1.8, 2.05]");
    assert!((1.7..=2.05).contains(&cross), "cross slope {cross} outside [1.7, 2.05]");
    let elapsed = start.elapsed();
    assert!(elapsed.as_secs() < 60, "bench run took {elapsed:?}, budget is one minute");
    println!(
        "criterion 01 PASS: slopes ovo={ovo:.4} (linear), early-self={es:.4}, \
         cross={cross:.4} (quadratic) in {elapsed:?}"
    );
}

/// Criterion 2: the closed-form model equals the instrumented counter with
/// integer equality, per phase, over the full config grid.
#[test]
fn criterion_02_counter_model_integer_equality() {
    let mut cells = 0usize;
    for scheme in Scheme::ALL {
        for k in [2usize, 3, 5] {
            for n in [1usize, 2, 4] {
                for d in [8usize, 16] {
                    for h in [1usize, 2] {
                        let cfg = FusionConfig { scheme, k, raw_dim: 4, n, d, h, classes: 2 };
                        let model = FusionModel::new(cfg, 7).unwrap();
                        let mut rng = Rng::seeded((k * 100 + n * 10 + d + h) as u64);
                        let embeddings: Vec<Matrix> =
                            (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();
                        let counter = FlopCounter::new();
                        model.fuse(&embeddings, Some(&counter));
                        let analytic = flops::analytic_breakdown(
                            scheme, k as u64, n as u64, d as u64, h as u64,
                        );
                        for (phase, expected) in analytic {
                            assert_eq!(
                                counter.count(phase),
                                expected,
                                "{scheme} k={k} n={n} d={d} h={h}, phase {}",
                                phase.label()
                            );
                        }
                        cells += 1;
                    }
                }
            }
        }
    }
    println!("criterion 02 PASS: exact per-phase counter/model equality on {cells} grid cells");
}

/// Criterion 3: with two modalities, the OvO score equals the bilinear
/// general-attention score m_1 * w * m_2^T bit-exactly.
#[test]
fn criterion_03_two_modality_bilinear_reduction() {
    let mut rng = Rng::seeded(3);
    for inst in 0..100 {
        let n = 1 + (rng.next_u64() % 4) as usize;
        let d = 1 + (rng.next_u64() % 16) as usize;
        let m1 = rng.matrix(n, d, -2.0, 2.0);
        let m2 = rng.matrix(n, d, -2.0, 2.0);
        let w = rng.matrix(d, d, -1.0, 1.0);
        let score = ovo_score(&m1, &[&m2], &w, None);
        // Independent oracle: naive triple loop for m1 * w * m2^T.
        for r in 0..n {
            for c in 0..n {
                let mut acc = 0.0;
                for x in 0..d {
                    let mut wm = 0.0;
                    for y in 0..d {
                        wm += w.get(y, x) * m1.get(r, y);
                    }
                    acc += wm * m2.get(c, x);
                }
                // Matching the kernel's accumulation order makes the oracle
                // reproduce the exact floating-point value, not just a close
                // one; equality below is bitwise.
                assert_eq!(score.get(r, c), acc, "instance {inst} at ({r},{c})");
            }
        }
    }
    println!("criterion 03 PASS: k=2 OvO score equals the bilinear form bit-exactly (100 instances)");
}

/// Criterion 4: permuting the others-list changes the OvO context by less
/// than 1e-12 and never changes any score-row argmax.
#[test]
fn criterion_04_others_permutation_invariance() {
    let mut rng = Rng::seeded(4);
    for inst in 0..100 {
        let k = [3usize, 5, 8][inst % 3];
        let n = 1 + (rng.next_u64() % 4) as usize;
        let d = 2 + (rng.next_u64() % 8) as usize;
        let ms: Vec<Matrix> = (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();
        let w = rng.matrix(d, d, -1.0, 1.0);
        let others: Vec<&Matrix> = ms[1..].iter().collect();
        let mut permuted = others.clone();
        // Deterministic shuffle of the others-list.
        for i in (1..permuted.len()).rev() {
            let j = (rng.next_u64() % (i as u64 + 1)) as usize;
            permuted.swap(i, j);
        }
        let ctx_a = ovo_context(&ms[0], &others, &w, None);
        let ctx_b = ovo_context(&ms[0], &permuted, &w, None);
        assert!(
            ctx_a.max_abs_diff(&ctx_b) < 1e-12,
            "instance {inst}: context drift {}",
            ctx_a.max_abs_diff(&ctx_b)
        );
        let score_a = ovo_score(&ms[0], &others, &w, None);
        let score_b = ovo_score(&ms[0], &permuted, &w, None);
        let argmax = |m: &Matrix, r: usize| {
            (0..m.cols()).max_by(|&a, &b| m.get(r, a).total_cmp(&m.get(r, b))).unwrap()
        };
        for r in 0..n {
            assert_eq!(argmax(&score_a, r), argmax(&score_b, r), "instance {inst} row {r}");
        }
    }
    println!("criterion 04 PASS: others-permutation invariance < 1e-12 with exact argmax (100 instances)");
}

/// Criterion 5: autograd gradients match central finite differences to
/// better than 1e-4 max relative error for all four schemes.
#[test]
fn criterion_05_gradient_fidelity() {
    let mut rng = Rng::seeded(5);
    let mut worst: f64 = 0.0;
    for scheme in Scheme::ALL {
        let cfg = FusionConfig { scheme, k: 3, raw_dim: 6, n: 2, d: 8, h: 2, classes: 2 };
        let mut model = FusionModel::new(cfg, 55).unwrap();
        let samples: Vec<(Vec<Vec<f64>>, usize)> = (0..2)
            .map(|s| {
                let modalities: Vec<Vec<f64>> =
                    (0..3).map(|_| (0..6).map(|_| rng.uniform(-1.0, 1.0)).collect()).collect();
                (modalities, s % 2)
            })
            .collect();
        let batch: Vec<(&[Vec<f64>], usize)> =
            samples.iter().map(|(m, l)| (m.as_slice(), *l)).collect();
        let report = grad_check(&mut model, &batch, 1e-5).unwrap();
        assert!(
            report.max_error < 1e-4,
            "{scheme}: grad-check error {} at {}",
            report.max_error,
            report.worst_param
        );
        worst = worst.max(report.max_error);
    }
    println!("criterion 05 PASS: grad-check max relative error {worst:.2e} < 1e-4 for all schemes");
}

/// Criterion 6: delta-FLOPs ordering ovo < cross <= early-self holds for
/// every k in 2..=20 at the shared benchmark shape.
#[test]
fn criterion_06_integration_cost_ordering() {
    let (n, d, h) = bench_config();
    for k in 2..=20u64 {
        let ovo = flops::delta_flops(Scheme::Ovo, k, n, d, h);
        let cross = flops::delta_flops(Scheme::CrossPairwise, k, n, d, h);
        let es = flops::delta_flops(Scheme::EarlySelf, k, n, d, h);
        assert!(
            ovo < cross && cross <= es,
            "ordering broken at k={k}: ovo={ovo}, cross={cross}, early-self={es}"
        );
    }
    let show = |k: u64| {
        format!(
            "k={k}: {} < {} <= {}",
            flops::delta_flops(Scheme::Ovo, k, n, d, h),
            flops::delta_flops(Scheme::CrossPairwise, k, n, d, h),
            flops::delta_flops(Scheme::EarlySelf, k, n, d, h)
        )
    };
    println!("criterion 06 PASS: ovo < cross <= early-self for k=2..=20 ({}; {})", show(2), show(20));
}

/// Criterion 7: at k=20, n=4, d=16 one fused forward pass of OvO is at
/// least 3x faster than pairwise cross-attention (median over repeats).
#[test]
fn criterion_07_wall_clock_advantage() {
    let (n, d, h) = (4usize, 16usize, 2usize);
    let k = 20usize;
    let mut rng = Rng::seeded(7);
    let embeddings: Vec<Matrix> = (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();
    let median_pass_ns = |scheme: Scheme| {
        let cfg = FusionConfig { scheme, k, raw_dim: 1, n, d, h, classes: 2 };
        let model = FusionModel::new(cfg, 7).unwrap();
        model.fuse(&embeddings, None); // warm-up
        let mut times: Vec<u128> = (0..31)
            .map(|_| {
                let t0 = Instant::now();
                // Several passes per measurement to stay well above timer
                // granularity.
                for _ in 0..8 {
                    std::hint::black_box(model.fuse(&embeddings, None));
                }
                t0.elapsed().as_nanos()
            })
            .collect();
        times.sort_unstable();
        times[times.len() / 2]
    };
    let ovo = median_pass_ns(Scheme::Ovo);
    let cross = median_pass_ns(Scheme::CrossPairwise);
    let ratio = cross as f64 / ovo as f64;
    assert!(ratio >= 3.0, "cross/ovo wall-clock ratio {ratio:.2} < 3.0 (ovo {ovo} ns, cross {cross} ns)");
    println!("criterion 07 PASS: OvO {ratio:.1}x faster than cross-attention per fused pass at k=20");
}

/// Criterion 8: the generated dataset obeys its class rules exhaustively and
/// the stratified 80/10/10 split yields 1600/200/200 with class balance
/// within one sample.
#[test]
fn criterion_08_simulation_integrity() {
    let config = SimConfig::default();
    let dataset = simdata::generate(&config).unwrap();
    assert_eq!(dataset.samples.len(), 2000);
    for (i, s) in dataset.samples.iter().enumerate() {
        assert_eq!(s.base_values.len(), config.k, "sample {i}");
        match s.label {
            0 => {
                let sum: f64 = s.base_values.iter().sum();
                assert!((sum - 1.0).abs() <= 1e-9, "sample {i}: class-0 sum {sum}");
            }
            1 => {
                for &v in &s.base_values {
                    assert!(v < config.threshold, "sample {i}: class-1 value {v}");
                }
            }
            other => panic!("sample {i}: unexpected label {other}"),
        }
    }
    let (train_set, val_set, test_set) = simdata::split(&dataset.samples, (80, 10, 10), 42).unwrap();
    assert_eq!((train_set.len(), val_set.len(), test_set.len()), (1600, 200, 200));
    for (name, set) in [("train", &train_set), ("val", &val_set), ("test", &test_set)] {
        let ones = set.iter().filter(|s| s.label == 1).count() as i64;
        let zeros = set.len() as i64 - ones;
        assert!((ones - zeros).abs() <= 1, "{name} split imbalance: {zeros} vs {ones}");
    }
    println!("criterion 08 PASS: class rules hold on all 2000 samples; split 1600/200/200 balanced");
}

/// Criterion 9: the 10-seed protocol emits mean +/- std aggregates and a
/// Welch t-test with an alpha = 0.01 verdict, and identical reruns are
/// bit-identical.
#[test]
fn criterion_09_protocol_fidelity() {
    let config = SimConfig { k: 3, vec_len: 6, samples: 120, seed: 9, ..SimConfig::default() };
    let dataset = simdata::generate(&config).unwrap();
    let (train_set, val_set, test_set) = simdata::split(&dataset.samples, (80, 10, 10), 42).unwrap();
    let base = TrainConfig { learning_rate: 1e-2, batch_size: 16, max_epochs: 4, ..TrainConfig::default() };
    let seeds: Vec<u64> = (0..10).collect();
    let run = |scheme: Scheme| {
        let cfg = FusionConfig { scheme, k: 3, raw_dim: 6, n: 2, d: 8, h: 2, classes: 2 };
        train::multi_seed(cfg, &train_set, &val_set, &test_set, &base, &seeds).unwrap()
    };
    let (agg_ovo, _) = run(Scheme::Ovo);
    let (agg_cat, _) = run(Scheme::Concat);
    assert_eq!(agg_ovo.seeds.len(), 10);
    assert!(agg_ovo.std_test_accuracy.is_finite() && agg_ovo.mean_test_accuracy.is_finite());
    let formatted =
        format!("{:.3} \u{b1} {:.3}", agg_ovo.mean_test_accuracy, agg_ovo.std_test_accuracy);
    let (t, p) =
        train::t_test(&agg_ovo.per_seed_test_accuracy, &agg_cat.per_seed_test_accuracy).unwrap();
    let verdict = p < 0.01;
    assert!(p.is_finite() && (0.0..=1.0).contains(&p), "p-value {p} out of range");

    // Bit-identical rerun of the full protocol.
    let (agg_ovo2, runs2) = run(Scheme::Ovo);
    assert_eq!(
        serde_json::to_string(&agg_ovo).unwrap(),
        serde_json::to_string(&agg_ovo2).unwrap(),
        "aggregate not bit-identical across reruns"
    );
    for r in &runs2 {
        assert!(r.train_flops > 0);
    }
    println!(
        "criterion 09 PASS: 10-seed aggregate {formatted}, Welch t={t:.3}, p={p:.3e}, \
         significant@0.01={verdict}; rerun bit-identical"
    );
}

/// Criterion 10: OvO fusion on 5-modality simulated data reaches more than
/// 0.75 test accuracy with hyperparameters from the default grid, in under
/// five minutes.
#[test]
fn criterion_10_learnability() {
    let start = Instant::now();
    let config = SimConfig { k: 5, seed: 10, ..SimConfig::default() };
    let dataset = simdata::generate(&config).unwrap();
    let (train_set, val_set, test_set) = simdata::split(&dataset.samples, (80, 10, 10), 42).unwrap();
    // lr=1e-2, batch=32, h=2 is a default-grid point.
    let cfg = TrainConfig { learning_rate: 1e-2, batch_size: 32, ..TrainConfig::default() };
    let model_cfg =
        FusionConfig { scheme: Scheme::Ovo, k: 5, raw_dim: 20, n: 4, d: 16, h: 2, classes: 2 };
    let (_, result) = train::run_seed(model_cfg, &train_set, &val_set, &test_set, &cfg).unwrap();
    let elapsed = start.elapsed();
    assert!(
        result.test_accuracy > 0.75,
        "test accuracy {:.3} below the 0.75 baseline",
        result.test_accuracy
    );
    assert!(elapsed.as_secs() < 300, "learnability run took {elapsed:?}, budget is five minutes");
    println!(
        "criterion 10 PASS: OvO k=5 test accuracy {:.3} (F1 {:.3}) after {} epochs in {elapsed:?}",
        result.test_accuracy,
        result.test_f1,
        result.epochs.len()
    );
}

//! The multi-seed protocol: mean +/- std aggregates and a Welch t-test.
//!
//! Trains two schemes over ten seeds each, reports the aggregate test
//! accuracy, and tests the difference for significance at alpha = 0.01
//! with Welch's unequal-variance t-test.
//!
//! Run with: cargo run --release --example significance_test

use ovo_attention::fusion::{FusionConfig, Scheme};
use ovo_attention::simdata::{generate, split, SimConfig};
use ovo_attention::train::{multi_seed, t_test, TrainConfig};

fn main() {
    // A small, noisy dataset keeps per-seed variance visible.
    let data_cfg = SimConfig { k: 3, vec_len: 6, samples: 200, ..SimConfig::default() };
    let dataset = generate(&data_cfg).unwrap();
    let (train_set, val_set, test_set) = split(&dataset.samples, (80, 10, 10), 42).unwrap();

    let base = TrainConfig {
        learning_rate: 1e-2,
        batch_size: 16,
        max_epochs: 10,
        ..TrainConfig::default()
    };
    let seeds: Vec<u64> = (0..10).collect();

    let mut per_scheme = Vec::new();
    for scheme in [Scheme::Ovo, Scheme::Concat] {
        let model_cfg = FusionConfig {
            scheme,
            k: data_cfg.k,
            raw_dim: data_cfg.vec_len,
            n: 2,
            d: 8,
            h: 2,
            classes: 2,
        };
        let (agg, _) = multi_seed(model_cfg, &train_set, &val_set, &test_set, &base, &seeds).unwrap();
        println!(
            "{:<10} test accuracy {:.3} \u{b1} {:.3}   F1 {:.3} \u{b1} {:.3}   ({} seeds)",
            scheme.to_string(),
            agg.mean_test_accuracy,
            agg.std_test_accuracy,
            agg.mean_test_f1,
            agg.std_test_f1,
            seeds.len()
        );
        per_scheme.push((scheme, agg));
    }

    let (t, p) = t_test(
        &per_scheme[0].1.per_seed_test_accuracy,
        &per_scheme[1].1.per_seed_test_accuracy,
    )
    .unwrap();
    println!("\nWelch t-test (ovo vs concat): t = {t:.3}, p = {p:.4}");
    println!(
        "difference {} significant at alpha = 0.01",
        if p < 0.01 { "IS" } else { "is NOT" }
    );
}

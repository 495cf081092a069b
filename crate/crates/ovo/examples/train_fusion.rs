//! Training one fusion model per scheme on the synthetic task.
//!
//! Adam with mini-batch cross-entropy, early stopping on validation
//! accuracy with best-weight restore, and FLOP accounting of the training
//! pass. Prints per-scheme test metrics and the training cost.
//!
//! Run with: cargo run --release --example train_fusion

use ovo_attention::fusion::{FusionConfig, Scheme};
use ovo_attention::simdata::{generate, split, SimConfig};
use ovo_attention::train::{run_seed, TrainConfig};

fn main() {
    let data_cfg = SimConfig { k: 5, ..SimConfig::default() };
    let dataset = generate(&data_cfg).unwrap();
    let (train_set, val_set, test_set) = split(&dataset.samples, (80, 10, 10), 42).unwrap();
    println!(
        "dataset: k={}, {} train / {} val / {} test\n",
        data_cfg.k,
        train_set.len(),
        val_set.len(),
        test_set.len()
    );

    let cfg = TrainConfig { learning_rate: 1e-2, batch_size: 32, ..TrainConfig::default() };
    println!(
        "{:<16}{:>10}{:>10}{:>8}{:>16}",
        "scheme", "test acc", "test F1", "epochs", "train GFLOPs"
    );
    for scheme in [Scheme::Concat, Scheme::Ovo, Scheme::CrossPairwise, Scheme::EarlySelf] {
        let model_cfg = FusionConfig {
            scheme,
            k: data_cfg.k,
            raw_dim: data_cfg.vec_len,
            n: 4,
            d: 16,
            h: 2,
            classes: 2,
        };
        let (_, result) = run_seed(model_cfg, &train_set, &val_set, &test_set, &cfg).unwrap();
        println!(
            "{:<16}{:>10.3}{:>10.3}{:>8}{:>16.3}",
            scheme.to_string(),
            result.test_accuracy,
            result.test_f1,
            result.epochs.len(),
            result.train_flops as f64 / 1e9
        );
    }
}

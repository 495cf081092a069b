//! The synthetic multimodal classification dataset.
//!
//! Class 0 draws k values that are normalized to sum to one; class 1 draws
//! k values independently below a threshold. Each scalar is expanded into a
//! noisy constant vector, one vector per modality. The task is only solvable
//! by combining modalities: a single modality's magnitude is weakly
//! informative, the sum across modalities is decisive.
//!
//! Run with: cargo run --example generate_dataset

use ovo_attention::simdata::{generate, split, to_csv, SimConfig};

fn main() {
    let config = SimConfig { k: 5, vec_len: 8, samples: 10, ..SimConfig::default() };
    let dataset = generate(&config).unwrap();

    println!("config: {config:?}\n");
    for (i, s) in dataset.samples.iter().enumerate() {
        let sum: f64 = s.base_values.iter().sum();
        let bases: Vec<String> = s.base_values.iter().map(|v| format!("{v:.3}")).collect();
        println!("sample {i}: label {}  bases [{}]  sum {sum:.3}", s.label, bases.join(", "));
    }

    println!("\nfirst CSV lines:");
    for line in to_csv(&dataset).lines().take(3) {
        let prefix: String = line.chars().take(72).collect();
        println!("  {prefix}...");
    }

    // The full-size dataset splits stratified 80/10/10.
    let full = generate(&SimConfig::default()).unwrap();
    let (train, val, test) = split(&full.samples, (80, 10, 10), 42).unwrap();
    let balance = |set: &[ovo_attention::simdata::SimSample]| {
        let ones = set.iter().filter(|s| s.label == 1).count();
        format!("{} ({} class-1)", set.len(), ones)
    };
    println!("\ndefault dataset split: train {}, val {}, test {}", balance(&train), balance(&val), balance(&test));
}

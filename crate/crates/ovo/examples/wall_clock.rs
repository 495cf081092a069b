//! Wall-clock cost of one fused forward pass as modalities grow.
//!
//! Measures the median time of the integration stage for OvO and pairwise
//! cross-attention at increasing modality counts; the speedup tracks the
//! linear-versus-quadratic FLOP gap.
//!
//! Run with: cargo run --release --example wall_clock

use std::time::Instant;

use ovo_attention::fusion::{FusionConfig, FusionModel, Scheme};
use ovo_attention::numerics::{Matrix, Rng};

fn median_ns(model: &FusionModel, embeddings: &[Matrix]) -> u128 {
    model.fuse(embeddings, None); // warm-up
    let mut times: Vec<u128> = (0..21)
        .map(|_| {
            let t0 = Instant::now();
            for _ in 0..8 {
                std::hint::black_box(model.fuse(embeddings, None));
            }
            t0.elapsed().as_nanos() / 8
        })
        .collect();
    times.sort_unstable();
    times[times.len() / 2]
}

fn main() {
    let (n, d, h) = (4usize, 16usize, 2usize);
    let mut rng = Rng::seeded(0);
    println!("median wall time of one fused pass (n={n}, d={d}, h={h})\n");
    println!("{:>4}{:>14}{:>14}{:>10}", "k", "ovo (us)", "cross (us)", "speedup");
    for k in [2usize, 5, 10, 15, 20] {
        let embeddings: Vec<Matrix> = (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();
        let time = |scheme| {
            let cfg = FusionConfig { scheme, k, raw_dim: 1, n, d, h, classes: 2 };
            median_ns(&FusionModel::new(cfg, 0).unwrap(), &embeddings)
        };
        let ovo = time(Scheme::Ovo);
        let cross = time(Scheme::CrossPairwise);
        println!(
            "{k:>4}{:>14.1}{:>14.1}{:>9.1}x",
            ovo as f64 / 1e3,
            cross as f64 / 1e3,
            cross as f64 / ovo as f64
        );
    }
}

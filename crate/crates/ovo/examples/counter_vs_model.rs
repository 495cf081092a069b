//! Dual FLOP accounting: instrumented counter versus closed-form model.
//!
//! Runs one fused forward pass per scheme with the runtime counter attached,
//! then prints the per-phase counts next to the analytic expressions. The
//! two columns agree with integer equality — the analytic model is not a
//! big-O estimate but an exact op-for-op mirror of the implementation.
//!
//! Run with: cargo run --example counter_vs_model

use ovo_attention::flops::{analytic_breakdown, FlopCounter};
use ovo_attention::fusion::{FusionConfig, FusionModel, Scheme};
use ovo_attention::numerics::{Matrix, Rng};

fn main() {
    let (k, n, d, h) = (3usize, 2usize, 8usize, 2usize);
    let mut rng = Rng::seeded(1);
    let embeddings: Vec<Matrix> = (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();

    for scheme in Scheme::ALL {
        let cfg = FusionConfig { scheme, k, raw_dim: 4, n, d, h, classes: 2 };
        let model = FusionModel::new(cfg, 0).unwrap();
        let counter = FlopCounter::new();
        model.fuse(&embeddings, Some(&counter));

        println!("{scheme} (k={k}, n={n}, d={d}, h={h})");
        println!("  {:<32}{:>12}{:>12}", "phase", "measured", "analytic");
        let analytic = analytic_breakdown(scheme, k as u64, n as u64, d as u64, h as u64);
        for (phase, expected) in analytic {
            let measured = counter.count(phase);
            assert_eq!(measured, expected, "phase {} diverged", phase.label());
            println!("  {:<32}{measured:>12}{expected:>12}", phase.label());
        }
        println!("  {:<32}{:>12}\n", "total", counter.total());
    }
    println!("all phases agree with integer equality");
}

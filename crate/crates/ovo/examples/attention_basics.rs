//! The three attention mechanisms on small hand-sized inputs.
//!
//! Shows: scaled dot-product attention, one directional cross-attention
//! step, the OvO score/context pair, the exact two-modality reduction of
//! OvO to a bilinear attention score, and invariance of the OvO context to
//! the order of the "other" modalities.
//!
//! Run with: cargo run --example attention_basics

use ovo_attention::attention::{
    cross_attention_pair, ovo_context, ovo_score, scaled_dot_attention, QkvParams,
};
use ovo_attention::numerics::{Matrix, Rng};

fn show(name: &str, m: &Matrix) {
    println!("{name} ({}x{}):", m.rows(), m.cols());
    for r in 0..m.rows() {
        let row: Vec<String> = m.row(r).iter().map(|v| format!("{v:8.4}")).collect();
        println!("  [{}]", row.join(", "));
    }
}

fn main() {
    let mut rng = Rng::seeded(42);
    let (n, d) = (3, 4);

    // Scaled dot-product attention with q = k = v.
    let x = rng.matrix(n, d, -1.0, 1.0);
    let out = scaled_dot_attention(&x, &x, &x, None);
    show("self-attention(x, x, x)", &out);

    // A directional cross-attention step is not symmetric.
    let a = rng.matrix(n, d, -1.0, 1.0);
    let b = rng.matrix(n, d, -1.0, 1.0);
    let params = QkvParams::random(d, 2, &mut rng);
    let ab = cross_attention_pair(&a, &b, &params, None);
    let ba = cross_attention_pair(&b, &a, &params, None);
    println!(
        "\ncross(a->b) vs cross(b->a): max |diff| = {:.4} (directional, not symmetric)",
        ab.max_abs_diff(&ba)
    );

    // OvO: one score/context per modality against the mean of the others.
    let k = 4;
    let ms: Vec<Matrix> = (0..k).map(|_| rng.matrix(n, d, -1.0, 1.0)).collect();
    let w = rng.matrix(d, d, -1.0, 1.0);
    let others: Vec<&Matrix> = ms[1..].iter().collect();
    let score = ovo_score(&ms[0], &others, &w, None);
    show("\novo score for modality 0 (vs mean of 3 others)", &score);
    let ctx = ovo_context(&ms[0], &others, &w, None);
    show("ovo context for modality 0", &ctx);

    // With k = 2 the OvO score is exactly the bilinear form m1 * w * m2^T.
    let bilinear = ms[0].matmul(&w, None).matmul_nt(&ms[1], None);
    let reduced = ovo_score(&ms[0], &[&ms[1]], &w, None);
    println!(
        "\nk=2 reduction: ovo_score == m1*w*m2^T bit-exactly? {}",
        reduced.max_abs_diff(&bilinear) == 0.0
    );

    // Averaging makes the context independent of the order of the others.
    let shuffled: Vec<&Matrix> = vec![&ms[3], &ms[1], &ms[2]];
    let ctx_perm = ovo_context(&ms[0], &shuffled, &w, None);
    println!(
        "permutation invariance: max |diff| after reordering others = {:.2e}",
        ctx.max_abs_diff(&ctx_perm)
    );
}

//! The three integration mechanisms compared here: scaled dot-product
//! self-attention over an early-fused sequence, pairwise cross-attention,
//! and one-versus-others (OvO) attention with its multi-headed extension.
//!
//! These are the reference, matrix-level implementations. The trainable,
//! tape-recorded versions live in [`crate::fusion`]; tests pin the two
//! against each other.
//!
//! No positional encodings, masking, dropout or layer norm: the comparison
//! is between bare integration mechanisms.

use crate::flops::{cost, FlopCounter, Phase};
use crate::numerics::{concat_cols, concat_rows, softmax_rows, Matrix, Rng};

/// One modality's encoded representation: n tokens by d dims. Within one
/// fusion call all modalities share n and d.
pub type ModalityEmbedding = Matrix;

/// Per-head query/key/value projections plus the output projection, for the
/// self-attention and cross-attention schemes.
#[derive(Debug, Clone)]
pub struct QkvParams {
    /// Per-head d x (d/h) projections.
    pub wq: Vec<Matrix>,
    pub wk: Vec<Matrix>,
    pub wv: Vec<Matrix>,
    /// d x d output projection applied after head concatenation.
    pub wo: Matrix,
}

impl QkvParams {
    pub fn heads(&self) -> usize {
        self.wq.len()
    }

    pub fn identity(d: usize) -> Self {
        QkvParams {
            wq: vec![Matrix::identity(d)],
            wk: vec![Matrix::identity(d)],
            wv: vec![Matrix::identity(d)],
            wo: Matrix::identity(d),
        }
    }

    pub fn random(d: usize, h: usize, rng: &mut Rng) -> Self {
        assert!(d % h == 0, "model dim {d} not divisible by head count {h}");
        let dh = d / h;
        let bound = 1.0 / (d as f64).sqrt();
        let heads = |rng: &mut Rng| (0..h).map(|_| rng.matrix(d, dh, -bound, bound)).collect();
        QkvParams {
            wq: heads(rng),
            wk: heads(rng),
            wv: heads(rng),
            wo: rng.matrix(d, d, -bound, bound),
        }
    }
}

/// OvO multi-head parameters: modality-and-head-specific input projections,
/// one shared bilinear matrix per head, and the output projection.
///
/// The bilinear matrix is shared across modalities within a head; sharing it
/// across heads as well would make heads redundant up to input projections.
#[derive(Debug, Clone)]
pub struct OvoParams {
    /// proj[modality][head]: d x (d/h).
    pub proj: Vec<Vec<Matrix>>,
    /// Per-head shared (d/h) x (d/h) bilinear matrix.
    pub w: Vec<Matrix>,
    /// d x d output projection.
    pub wo: Matrix,
}

impl OvoParams {
    pub fn heads(&self) -> usize {
        self.w.len()
    }

    pub fn identity(k: usize, d: usize) -> Self {
        OvoParams {
            proj: vec![vec![Matrix::identity(d)]; k],
            w: vec![Matrix::identity(d)],
            wo: Matrix::identity(d),
        }
    }

    pub fn random(k: usize, d: usize, h: usize, rng: &mut Rng) -> Self {
        assert!(d % h == 0, "model dim {d} not divisible by head count {h}");
        let dh = d / h;
        let bound = 1.0 / (d as f64).sqrt();
        let proj = (0..k)
            .map(|_| (0..h).map(|_| rng.matrix(d, dh, -bound, bound)).collect())
            .collect();
        let wb = 1.0 / (dh as f64).sqrt();
        OvoParams {
            proj,
            w: (0..h).map(|_| rng.matrix(dh, dh, -wb, wb)).collect(),
            wo: rng.matrix(d, d, -bound, bound),
        }
    }
}

/// softmax(q . k^T / sqrt(d)) . v
pub fn scaled_dot_attention(
    q: &Matrix,
    kmat: &Matrix,
    v: &Matrix,
    counter: Option<&FlopCounter>,
) -> Matrix {
    assert_eq!(
        q.cols(),
        kmat.cols(),
        "query/key dim mismatch: {}x{} vs {}x{}",
        q.rows(),
        q.cols(),
        kmat.rows(),
        kmat.cols()
    );
    assert_eq!(
        kmat.rows(),
        v.rows(),
        "key/value length mismatch: {}x{} vs {}x{}",
        kmat.rows(),
        kmat.cols(),
        v.rows(),
        v.cols()
    );
    if let Some(c) = counter {
        c.set_phase(Phase::Scores);
    }
    let scores = q.matmul_nt(kmat, counter).scale(1.0 / (q.cols() as f64).sqrt(), counter);
    if let Some(c) = counter {
        c.set_phase(Phase::Softmax);
    }
    let weights = softmax_rows(&scores, counter);
    if let Some(c) = counter {
        c.set_phase(Phase::WeightedSum);
    }
    weights.matmul(v, counter)
}

/// Early fusion: concatenate all modalities into one (k*n x d) sequence and
/// run multi-head self-attention over it.
pub fn self_attention_fused(
    embeddings: &[ModalityEmbedding],
    params: &QkvParams,
    counter: Option<&FlopCounter>,
) -> Matrix {
    assert!(!embeddings.is_empty(), "need at least one modality");
    let refs: Vec<&Matrix> = embeddings.iter().collect();
    let x = concat_rows(&refs);
    let h = params.heads();
    let dh = x.cols() / h;
    let mut heads = Vec::with_capacity(h);
    for head in 0..h {
        if let Some(c) = counter {
            c.set_phase(Phase::Projections);
        }
        let q = x.matmul(&params.wq[head], counter);
        let k = x.matmul(&params.wk[head], counter);
        let v = x.matmul(&params.wv[head], counter);
        if let Some(c) = counter {
            c.set_phase(Phase::Scores);
        }
        let scores = q.matmul_nt(&k, counter).scale(1.0 / (dh as f64).sqrt(), counter);
        if let Some(c) = counter {
            c.set_phase(Phase::Softmax);
        }
        let weights = softmax_rows(&scores, counter);
        if let Some(c) = counter {
            c.set_phase(Phase::WeightedSum);
        }
        heads.push(weights.matmul(&v, counter));
    }
    let cat = concat_cols(&heads.iter().collect::<Vec<_>>());
    if let Some(c) = counter {
        c.set_phase(Phase::ConcatOutput);
    }
    cat.matmul(&params.wo, counter)
}

/// One directional cross-attention step: queries from `query_mod`, keys and
/// values from `kv_mod`. Returns the head-concatenated (n x d) context; the
/// output projection is applied after aggregation over a modality's pairs.
pub fn cross_attention_pair(
    query_mod: &ModalityEmbedding,
    kv_mod: &ModalityEmbedding,
    params: &QkvParams,
    counter: Option<&FlopCounter>,
) -> Matrix {
    assert_eq!(
        query_mod.cols(),
        kv_mod.cols(),
        "modality dim mismatch: {}x{} vs {}x{}",
        query_mod.rows(),
        query_mod.cols(),
        kv_mod.rows(),
        kv_mod.cols()
    );
    let h = params.heads();
    let dh = query_mod.cols() / h;
    let mut heads = Vec::with_capacity(h);
    for head in 0..h {
        if let Some(c) = counter {
            c.set_phase(Phase::Projections);
        }
        let q = query_mod.matmul(&params.wq[head], counter);
        let k = kv_mod.matmul(&params.wk[head], counter);
        let v = kv_mod.matmul(&params.wv[head], counter);
        if let Some(c) = counter {
            c.set_phase(Phase::Scores);
        }
        let scores = q.matmul_nt(&k, counter).scale(1.0 / (dh as f64).sqrt(), counter);
        if let Some(c) = counter {
            c.set_phase(Phase::Softmax);
        }
        let weights = softmax_rows(&scores, counter);
        if let Some(c) = counter {
            c.set_phase(Phase::WeightedSum);
        }
        heads.push(weights.matmul(&v, counter));
    }
    concat_cols(&heads.iter().collect::<Vec<_>>())
}

/// Bilinear OvO score: m_i . w . mean(others)^T, shape (n x n). No 1/sqrt(d)
/// scaling; the score is the plain bilinear form.
pub fn ovo_score(
    m_i: &ModalityEmbedding,
    others: &[&ModalityEmbedding],
    w: &Matrix,
    counter: Option<&FlopCounter>,
) -> Matrix {
    assert!(!others.is_empty(), "OvO requires at least two modalities");
    if let Some(c) = counter {
        c.set_phase(Phase::Averaging);
    }
    let mean = mean_of_others(others, counter);
    // m_i * w is a linear projection of the query side; the score matmul
    // proper stays O(n^2 * d).
    if let Some(c) = counter {
        c.set_phase(Phase::Projections);
    }
    let projected = m_i.matmul(w, counter);
    if let Some(c) = counter {
        c.set_phase(Phase::Scores);
    }
    projected.matmul_nt(&mean, counter)
}

/// Mean over the "other" modalities, summed in list order. Counted like
/// `mean_except` over a (k = others + 1)-element list.
fn mean_of_others(others: &[&Matrix], counter: Option<&FlopCounter>) -> Matrix {
    let (n, d) = others[0].shape();
    let mut acc = Matrix::zeros(n, d);
    for m in others {
        assert_eq!(m.shape(), (n, d), "other-modality shape mismatch");
        for (a, &v) in acc.data_mut().iter_mut().zip(m.data()) {
            *a += v;
        }
    }
    let denom = others.len() as f64;
    for a in acc.data_mut() {
        *a /= denom;
    }
    if let Some(c) = counter {
        c.add(cost::mean_except(others.len() as u64 + 1, n as u64, d as u64));
    }
    acc
}

/// OvO context vector: softmax(score) . m_i, shape (n x d). The modality
/// itself serves as the values. With a single token (n = 1) the softmax
/// weight is 1 and the output equals m_i regardless of w — the degenerate
/// single-token case of the formula.
pub fn ovo_context(
    m_i: &ModalityEmbedding,
    others: &[&ModalityEmbedding],
    w: &Matrix,
    counter: Option<&FlopCounter>,
) -> Matrix {
    let score = ovo_score(m_i, others, w, counter);
    if let Some(c) = counter {
        c.set_phase(Phase::Softmax);
    }
    let weights = softmax_rows(&score, counter);
    if let Some(c) = counter {
        c.set_phase(Phase::WeightedSum);
    }
    weights.matmul(m_i, counter)
}

/// Multi-headed OvO for modality `i`: project every modality with its
/// modality-and-head-specific matrix (projection happens before averaging),
/// run the per-head OvO context, concatenate heads, apply the output
/// projection. Output shape (n x d) independent of k.
pub fn multihead_ovo(
    i: usize,
    embeddings: &[ModalityEmbedding],
    params: &OvoParams,
    counter: Option<&FlopCounter>,
) -> Matrix {
    assert!(embeddings.len() >= 2, "OvO requires at least two modalities");
    assert!(i < embeddings.len(), "modality index {i} out of range");
    let h = params.heads();
    let mut heads = Vec::with_capacity(h);
    for head in 0..h {
        if let Some(c) = counter {
            c.set_phase(Phase::Projections);
        }
        let projected: Vec<Matrix> = embeddings
            .iter()
            .enumerate()
            .map(|(j, m)| m.matmul(&params.proj[j][head], counter))
            .collect();
        let others: Vec<&Matrix> =
            projected.iter().enumerate().filter(|&(j, _)| j != i).map(|(_, m)| m).collect();
        heads.push(ovo_context(&projected[i], &others, &params.w[head], counter));
    }
    let cat = concat_cols(&heads.iter().collect::<Vec<_>>());
    if let Some(c) = counter {
        c.set_phase(Phase::ConcatOutput);
    }
    cat.matmul(&params.wo, counter)
}

//! Dual FLOP accounting for the integration stage.
//!
//! Two routes that must agree with integer equality:
//! - [`FlopCounter`], incremented by the instrumented kernels while a fusion
//!   layer actually runs, and
//! - [`analytic_flops`] / [`analytic_breakdown`], closed-form expressions per
//!   scheme built from the same per-operation cost model ([`cost`]).
//!
//! Cost model, declared once: a multiply-add counts as 2 FLOPs; exp, divide,
//! subtract and compare count as 1 each.

use std::cell::Cell;

use crate::fusion::Scheme;

/// Named accounting phases of an integration layer. Every counted FLOP is
/// attributed to exactly one phase.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Phase {
    Projections,
    Scores,
    Softmax,
    WeightedSum,
    Averaging,
    ConcatOutput,
}

pub const PHASES: [Phase; 6] = [
    Phase::Projections,
    Phase::Scores,
    Phase::Softmax,
    Phase::WeightedSum,
    Phase::Averaging,
    Phase::ConcatOutput,
];

impl Phase {
    pub fn label(self) -> &'static str {
        match self {
            Phase::Projections => "projections",
            Phase::Scores => "attention scores",
            Phase::Softmax => "softmax",
            Phase::WeightedSum => "weighted sum",
            Phase::Averaging => "averaging of other modalities",
            Phase::ConcatOutput => "concat/output projection",
        }
    }

    fn index(self) -> usize {
        match self {
            Phase::Projections => 0,
            Phase::Scores => 1,
            Phase::Softmax => 2,
            Phase::WeightedSum => 3,
            Phase::Averaging => 4,
            Phase::ConcatOutput => 5,
        }
    }
}

/// Monotone FLOP counter with a per-phase breakdown.
///
/// Kernels add to whatever phase is current; callers that know the structure
/// of the computation switch phases around the kernel calls. Uses interior
/// mutability so it can be threaded through otherwise-pure functions; one
/// counter per pipeline instance, never shared across threads.
#[derive(Debug, Default)]
pub struct FlopCounter {
    current: Cell<usize>,
    counts: [Cell<u64>; 6],
}

impl FlopCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn set_phase(&self, phase: Phase) {
        self.current.set(phase.index());
    }

    pub fn add(&self, flops: u64) {
        let cell = &self.counts[self.current.get()];
        cell.set(cell.get() + flops);
    }

    pub fn count(&self, phase: Phase) -> u64 {
        self.counts[phase.index()].get()
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().map(Cell::get).sum()
    }

    pub fn breakdown(&self) -> [(Phase, u64); 6] {
        PHASES.map(|p| (p, self.count(p)))
    }
}

/// Per-operation FLOP costs, shared by the instrumented kernels and the
/// analytic model.
pub mod cost {
    /// (m x n) . (n x p): one multiply plus one add per scalar term.
    pub fn matmul(m: u64, n: u64, p: u64) -> u64 {
        2 * m * n * p
    }

    /// Row softmax over an (r x c) matrix: max-subtract, exp, sum-accumulate,
    /// divide per element.
    pub fn softmax(r: u64, c: u64) -> u64 {
        4 * r * c
    }

    /// One elementwise add/subtract/multiply/divide over an (r x c) matrix.
    pub fn elementwise(r: u64, c: u64) -> u64 {
        r * c
    }

    /// Mean over the k-1 "other" (n x d) matrices of a k-list: one
    /// add-accumulate per matrix plus the final divide.
    pub fn mean_except(k: u64, n: u64, d: u64) -> u64 {
        (k - 1) * n * d + n * d
    }
}

fn check_config(scheme: Scheme, k: u64, n: u64, d: u64, h: u64) {
    assert!(k >= 1 && n >= 1 && d >= 1 && h >= 1, "config values must be positive");
    if scheme != Scheme::Concat {
        assert!(k >= 2, "attention schemes require at least two modalities, got k={k}");
        assert!(d % h == 0, "model dim {d} not divisible by head count {h}");
    }
}

/// Closed-form per-phase FLOP counts of one integration layer.
///
/// These mirror, operation by operation, exactly what the instrumented
/// fusion layers execute; the equality is enforced by the acceptance suite.
pub fn analytic_breakdown(scheme: Scheme, k: u64, n: u64, d: u64, h: u64) -> [(Phase, u64); 6] {
    check_config(scheme, k, n, d, h);
    let dh = d / h;
    let (proj, scores, softmax, weighted, averaging, concat_output) = match scheme {
        // Flatten and concatenate only: no arithmetic under the cost model.
        Scheme::Concat => (0, 0, 0, 0, 0, 0),
        Scheme::EarlySelf => {
            let kn = k * n;
            (
                3 * h * cost::matmul(kn, d, dh),
                h * (cost::matmul(kn, dh, kn) + cost::elementwise(kn, kn)),
                h * cost::softmax(kn, kn),
                h * cost::matmul(kn, kn, dh),
                0,
                cost::matmul(kn, d, d),
            )
        }
        Scheme::CrossPairwise => {
            let pairs = k * (k - 1);
            (
                // Q/K/V computed once per modality per head, reused across pairs.
                3 * k * h * cost::matmul(n, d, dh),
                pairs * h * (cost::matmul(n, dh, n) + cost::elementwise(n, n)),
                pairs * h * cost::softmax(n, n),
                pairs * h * cost::matmul(n, n, dh),
                // Aggregation: the per-query-modality projection that merges the
                // summed k-1 directional contexts into one n x d context.
                k * cost::matmul(n, d, d),
                // Output assembly: summing the k-1 contexts into one buffer
                // per query modality (k-2 elementwise adds each).
                k * (k - 2) * cost::elementwise(n, d),
            )
        }
        Scheme::Ovo => (
            // Per-modality per-head input projections W_k, plus the bilinear
            // map m_i * W: a linear projection of the query side, so the score
            // matmul proper stays O(n^2 * d) per modality.
            k * h * (cost::matmul(n, d, dh) + cost::matmul(n, dh, dh)),
            k * h * cost::matmul(n, dh, n),
            k * h * cost::softmax(n, n),
            k * h * cost::matmul(n, n, dh),
            // Running sum over all k projected modalities (k-1 adds), then a
            // subtract and a divide per modality.
            h * ((k - 1) * cost::elementwise(n, dh) + 2 * k * cost::elementwise(n, dh)),
            k * cost::matmul(n, d, d),
        ),
    };
    [
        (Phase::Projections, proj),
        (Phase::Scores, scores),
        (Phase::Softmax, softmax),
        (Phase::WeightedSum, weighted),
        (Phase::Averaging, averaging),
        (Phase::ConcatOutput, concat_output),
    ]
}

/// Exact integer FLOP count of one integration layer under the cost model.
pub fn analytic_flops(scheme: Scheme, k: u64, n: u64, d: u64, h: u64) -> u64 {
    analytic_breakdown(scheme, k, n, d, h).iter().map(|&(_, c)| c).sum()
}

/// Phases whose cost is attributed to integrating the modalities, per scheme.
///
/// Per-modality linear plumbing is excluded: the Q/K/V and OvO input
/// projections, and the per-modality output projections of cross and OvO,
/// cost the same O(k*n*d^2) for every scheme and act on single-modality data.
/// What remains is scheme-specific integration work: the attention core for
/// all three; early fusion's output projection (it operates on the fused
/// cross-modality sequence); and cross-attention's aggregation projection
/// that merges each modality's k-1 directional contexts.
pub fn delta_phases(scheme: Scheme) -> &'static [Phase] {
    match scheme {
        Scheme::Concat => &[],
        Scheme::EarlySelf => {
            &[Phase::Scores, Phase::Softmax, Phase::WeightedSum, Phase::ConcatOutput]
        }
        Scheme::CrossPairwise | Scheme::Ovo => {
            &[Phase::Scores, Phase::Softmax, Phase::WeightedSum, Phase::Averaging]
        }
    }
}

/// Integration cost relative to the concatenation baseline: the sum of the
/// scheme's [`delta_phases`] counts (concatenation itself costs zero in every
/// phase, so the baseline subtraction is implicit).
pub fn delta_flops(scheme: Scheme, k: u64, n: u64, d: u64, h: u64) -> u64 {
    let breakdown = analytic_breakdown(scheme, k, n, d, h);
    let phases = delta_phases(scheme);
    breakdown
        .iter()
        .filter(|(p, _)| phases.contains(p))
        .map(|&(_, c)| c)
        .sum()
}

/// Leading-term exponents (pow_k, pow_n, pow_d) of the per-layer complexity.
pub fn leading_term(scheme: Scheme) -> (u32, u32, u32) {
    match scheme {
        Scheme::Concat => (0, 0, 0),
        Scheme::EarlySelf => (2, 2, 1),
        Scheme::CrossPairwise => (2, 2, 1),
        Scheme::Ovo => (1, 2, 1),
    }
}

/// Slope of ln(y) against ln(x), fitted with the Theil-Sen estimator (the
/// median of all pairwise point-to-point slopes). Used for the scaling-law
/// fit of delta-FLOPs versus modality count; the robust estimator keeps the
/// fitted exponent close to the leading-term power when the small-k points
/// carry comparatively large lower-order terms.
pub fn log_log_slope(points: &[(f64, f64)]) -> f64 {
    assert!(points.len() >= 2, "need at least two points for a slope");
    let logs: Vec<(f64, f64)> = points
        .iter()
        .map(|&(x, y)| {
            assert!(x > 0.0 && y > 0.0, "log-log fit requires positive values");
            (x.ln(), y.ln())
        })
        .collect();
    let mut slopes = Vec::with_capacity(logs.len() * (logs.len() - 1) / 2);
    for i in 0..logs.len() {
        for j in i + 1..logs.len() {
            let dx = logs[j].0 - logs[i].0;
            assert!(dx != 0.0, "duplicate x value in slope fit");
            slopes.push((logs[j].1 - logs[i].1) / dx);
        }
    }
    slopes.sort_by(|a, b| a.total_cmp(b));
    let m = slopes.len();
    if m % 2 == 1 {
        slopes[m / 2]
    } else {
        0.5 * (slopes[m / 2 - 1] + slopes[m / 2])
    }
}

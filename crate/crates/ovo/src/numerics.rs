//! Minimal dense linear-algebra core with FLOP instrumentation hooks.
//!
//! Matrices are immutable values from the caller's viewpoint; every kernel is
//! a pure function plus an optional, explicitly passed [`FlopCounter`]. Shape
//! violations are programmer errors and panic with both shapes named.

use rand::seq::SliceRandom;
use rand::{Rng as _, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::flops::{cost, FlopCounter};

/// Dense row-major matrix of 64-bit floats.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Matrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl Matrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive, got {rows}x{cols}");
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_vec(rows: usize, cols: usize, data: Vec<f64>) -> Self {
        assert!(rows > 0 && cols > 0, "matrix dims must be positive, got {rows}x{cols}");
        assert_eq!(data.len(), rows * cols, "data length {} != {rows}x{cols}", data.len());
        Self { rows, cols, data }
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Self {
        assert!(!rows.is_empty(), "need at least one row");
        let cols = rows[0].len();
        let mut data = Vec::with_capacity(rows.len() * cols);
        for r in rows {
            assert_eq!(r.len(), cols, "ragged rows: {} vs {cols}", r.len());
            data.extend_from_slice(r);
        }
        Self::from_vec(rows.len(), cols, data)
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {0}x{1}", self.rows, self.cols);
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        assert!(r < self.rows && c < self.cols, "index ({r},{c}) out of {0}x{1}", self.rows, self.cols);
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn shape(&self) -> (usize, usize) {
        (self.rows, self.cols)
    }

    pub fn is_finite(&self) -> bool {
        self.data.iter().all(|v| v.is_finite())
    }

    /// Same data, new shape; element count must match.
    pub fn reshape(&self, rows: usize, cols: usize) -> Matrix {
        assert_eq!(
            rows * cols,
            self.rows * self.cols,
            "cannot reshape {}x{} into {rows}x{cols}",
            self.rows,
            self.cols
        );
        Matrix::from_vec(rows, cols, self.data.clone())
    }

    pub fn transpose(&self) -> Matrix {
        let mut out = Matrix::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[c * self.rows + r] = self.data[r * self.cols + c];
            }
        }
        out
    }

    /// Standard product; counts 2*m*n*p FLOPs.
    pub fn matmul(&self, other: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        assert_eq!(
            self.cols, other.rows,
            "matmul shape mismatch: {}x{} . {}x{}",
            self.rows, self.cols, other.rows, other.cols
        );
        let (m, n, p) = (self.rows, self.cols, other.cols);
        let mut out = Matrix::zeros(m, p);
        for i in 0..m {
            for j in 0..p {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += self.data[i * n + l] * other.data[l * p + j];
                }
                out.data[i * p + j] = acc;
            }
        }
        if let Some(c) = counter {
            c.add(cost::matmul(m as u64, n as u64, p as u64));
        }
        out
    }

    /// self . other^T without materializing the transpose; same cost model
    /// and summation order as `matmul` against an explicit transpose.
    pub fn matmul_nt(&self, other: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        assert_eq!(
            self.cols, other.cols,
            "matmul_nt shape mismatch: {}x{} . ({}x{})^T",
            self.rows, self.cols, other.rows, other.cols
        );
        let (m, n, p) = (self.rows, self.cols, other.rows);
        let mut out = Matrix::zeros(m, p);
        for i in 0..m {
            for j in 0..p {
                let mut acc = 0.0;
                for l in 0..n {
                    acc += self.data[i * n + l] * other.data[j * n + l];
                }
                out.data[i * p + j] = acc;
            }
        }
        if let Some(c) = counter {
            c.add(cost::matmul(m as u64, n as u64, p as u64));
        }
        out
    }

    pub fn add(&self, other: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        self.zip_with(other, counter, "add", |a, b| a + b)
    }

    pub fn sub(&self, other: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        self.zip_with(other, counter, "sub", |a, b| a - b)
    }

    pub fn mul_elem(&self, other: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        self.zip_with(other, counter, "mul_elem", |a, b| a * b)
    }

    fn zip_with(
        &self,
        other: &Matrix,
        counter: Option<&FlopCounter>,
        op: &str,
        f: impl Fn(f64, f64) -> f64,
    ) -> Matrix {
        assert_eq!(
            (self.rows, self.cols),
            (other.rows, other.cols),
            "{op} shape mismatch: {}x{} vs {}x{}",
            self.rows,
            self.cols,
            other.rows,
            other.cols
        );
        let data = self.data.iter().zip(&other.data).map(|(&a, &b)| f(a, b)).collect();
        if let Some(c) = counter {
            c.add(cost::elementwise(self.rows as u64, self.cols as u64));
        }
        Matrix { rows: self.rows, cols: self.cols, data }
    }

    /// Multiply every element by a scalar; one FLOP per element.
    pub fn scale(&self, factor: f64, counter: Option<&FlopCounter>) -> Matrix {
        if let Some(c) = counter {
            c.add(cost::elementwise(self.rows as u64, self.cols as u64));
        }
        Matrix {
            rows: self.rows,
            cols: self.cols,
            data: self.data.iter().map(|&v| v * factor).collect(),
        }
    }

    /// Add a 1-row bias to every row.
    pub fn add_row_broadcast(&self, bias: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
        assert_eq!(bias.rows, 1, "bias must be a single row, got {}x{}", bias.rows, bias.cols);
        assert_eq!(
            self.cols, bias.cols,
            "broadcast add shape mismatch: {}x{} vs 1x{}",
            self.rows, self.cols, bias.cols
        );
        let mut out = self.clone();
        for r in 0..self.rows {
            for c in 0..self.cols {
                out.data[r * self.cols + c] += bias.data[c];
            }
        }
        if let Some(c) = counter {
            c.add(cost::elementwise(self.rows as u64, self.cols as u64));
        }
        out
    }

    pub fn max_abs_diff(&self, other: &Matrix) -> f64 {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols), "shape mismatch in diff");
        self.data
            .iter()
            .zip(&other.data)
            .map(|(&a, &b)| (a - b).abs())
            .fold(0.0, f64::max)
    }
}

/// Numerically stabilized row softmax: subtracts the row max before
/// exponentiation. Counts 4 FLOPs per element.
pub fn softmax_rows(m: &Matrix, counter: Option<&FlopCounter>) -> Matrix {
    let (rows, cols) = m.shape();
    let mut out = Matrix::zeros(rows, cols);
    for r in 0..rows {
        let row = m.row(r);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let mut sum = 0.0;
        let out_row = &mut out.data_mut()[r * cols..(r + 1) * cols];
        for (o, &v) in out_row.iter_mut().zip(row) {
            *o = (v - max).exp();
            sum += *o;
        }
        for o in out_row.iter_mut() {
            *o /= sum;
        }
    }
    if let Some(c) = counter {
        c.add(cost::softmax(rows as u64, cols as u64));
    }
    out
}

/// Stack matrices in list order; all inputs must share a column count.
pub fn concat_rows(ms: &[&Matrix]) -> Matrix {
    assert!(!ms.is_empty(), "concat_rows needs at least one matrix");
    let cols = ms[0].cols();
    let mut data = Vec::new();
    for m in ms {
        assert_eq!(
            m.cols(),
            cols,
            "concat_rows column mismatch: {}x{} vs expected {cols} columns",
            m.rows(),
            m.cols()
        );
        data.extend_from_slice(m.data());
    }
    let rows = ms.iter().map(|m| m.rows()).sum();
    Matrix::from_vec(rows, cols, data)
}

/// Concatenate along the column axis; all inputs must share a row count.
pub fn concat_cols(ms: &[&Matrix]) -> Matrix {
    assert!(!ms.is_empty(), "concat_cols needs at least one matrix");
    let rows = ms[0].rows();
    let total_cols: usize = ms.iter().map(|m| m.cols()).sum();
    let mut out = Matrix::zeros(rows, total_cols);
    let mut offset = 0;
    for m in ms {
        assert_eq!(
            m.rows(),
            rows,
            "concat_cols row mismatch: {}x{} vs expected {rows} rows",
            m.rows(),
            m.cols()
        );
        for r in 0..rows {
            let dst = r * total_cols + offset;
            out.data_mut()[dst..dst + m.cols()].copy_from_slice(m.row(r));
        }
        offset += m.cols();
    }
    out
}

/// Elementwise mean of every matrix except index `i`, summed in ascending
/// index order for determinism.
pub fn mean_except(ms: &[&Matrix], i: usize, counter: Option<&FlopCounter>) -> Matrix {
    assert!(ms.len() >= 2, "OvO requires at least two modalities");
    assert!(i < ms.len(), "excluded index {i} out of range for {} matrices", ms.len());
    let shape = ms[0].shape();
    let mut acc = Matrix::zeros(shape.0, shape.1);
    for (j, m) in ms.iter().enumerate() {
        assert_eq!(m.shape(), shape, "mean_except shape mismatch at index {j}");
        if j != i {
            for (a, &v) in acc.data_mut().iter_mut().zip(m.data()) {
                *a += v;
            }
        }
    }
    let denom = (ms.len() - 1) as f64;
    for a in acc.data_mut() {
        *a /= denom;
    }
    if let Some(c) = counter {
        c.add(cost::mean_except(ms.len() as u64, shape.0 as u64, shape.1 as u64));
    }
    acc
}

/// Deterministic seeded generator. Identical seed, identical stream within
/// one build of the artifact.
#[derive(Debug, Clone)]
pub struct Rng {
    inner: ChaCha8Rng,
}

impl Rng {
    pub fn seeded(seed: u64) -> Self {
        Self { inner: ChaCha8Rng::seed_from_u64(seed) }
    }

    /// Uniform draw on [lo, hi).
    pub fn uniform(&mut self, lo: f64, hi: f64) -> f64 {
        assert!(lo < hi, "uniform bounds must satisfy lo < hi, got [{lo}, {hi})");
        self.inner.random_range(lo..hi)
    }

    pub fn shuffle<T>(&mut self, xs: &mut [T]) {
        xs.shuffle(&mut self.inner);
    }

    pub fn next_u64(&mut self) -> u64 {
        self.inner.random()
    }

    pub fn matrix(&mut self, rows: usize, cols: usize, lo: f64, hi: f64) -> Matrix {
        let data = (0..rows * cols).map(|_| self.uniform(lo, hi)).collect();
        Matrix::from_vec(rows, cols, data)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::flops::{FlopCounter, Phase};
    use proptest::prelude::*;
    use super::Rng;

    /// Independent schoolbook triple-loop oracle with the same summation
    /// order as the kernel.
    fn matmul_oracle(a: &Matrix, b: &Matrix) -> Matrix {
        let mut out = Matrix::zeros(a.rows(), b.cols());
        for i in 0..a.rows() {
            for j in 0..b.cols() {
                let mut acc = 0.0;
                for l in 0..a.cols() {
                    acc += a.get(i, l) * b.get(l, j);
                }
                out.set(i, j, acc);
            }
        }
        out
    }

    #[test]
    fn matmul_identity() {
        let m = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 6.0]]);
        let out = Matrix::identity(3).matmul(&m, None);
        assert_eq!(out, m);
    }

    #[test]
    fn matmul_counts_2mnp() {
        let a = Matrix::zeros(2, 3);
        let b = Matrix::zeros(3, 4);
        let c = FlopCounter::new();
        a.matmul(&b, Some(&c));
        assert_eq!(c.total(), 48);
    }

    #[test]
    fn matmul_hand_value() {
        let a = Matrix::from_rows(&[vec![1.0, 2.0], vec![3.0, 4.0]]);
        let b = Matrix::from_rows(&[vec![5.0], vec![6.0]]);
        let out = a.matmul(&b, None);
        assert_eq!(out, Matrix::from_rows(&[vec![17.0], vec![39.0]]));
        assert_eq!(out, matmul_oracle(&a, &b));
    }

    #[test]
    #[should_panic(expected = "matmul shape mismatch: 2x3 . 4x2")]
    fn matmul_shape_mismatch_names_shapes() {
        Matrix::zeros(2, 3).matmul(&Matrix::zeros(4, 2), None);
    }

    #[test]
    fn matmul_nt_equals_explicit_transpose() {
        let mut rng = Rng::seeded(7);
        let a = rng.matrix(3, 5, -1.0, 1.0);
        let b = rng.matrix(4, 5, -1.0, 1.0);
        assert_eq!(a.matmul_nt(&b, None), a.matmul(&b.transpose(), None));
    }

    #[test]
    fn softmax_symmetric_row() {
        let out = softmax_rows(&Matrix::from_rows(&[vec![0.0, 0.0]]), None);
        assert_eq!(out.row(0), &[0.5, 0.5]);
    }

    #[test]
    fn softmax_single_element_row() {
        for x in [-3.0, 0.0, 123.456] {
            let out = softmax_rows(&Matrix::from_rows(&[vec![x]]), None);
            assert_eq!(out.get(0, 0), 1.0);
        }
    }

    #[test]
    fn softmax_derived_value() {
        // e^0.7071 / (e^0.7071 + 1) computed independently.
        let out = softmax_rows(&Matrix::from_rows(&[vec![0.7071, 0.0]]), None);
        assert!((out.get(0, 0) - 0.6698).abs() < 1e-4);
        assert!((out.get(0, 1) - 0.3302).abs() < 1e-4);
    }

    #[test]
    fn softmax_counts_4_per_element() {
        let c = FlopCounter::new();
        c.set_phase(Phase::Softmax);
        softmax_rows(&Matrix::zeros(3, 5), Some(&c));
        assert_eq!(c.count(Phase::Softmax), 60);
    }

    #[test]
    fn concat_rows_stacks_in_order() {
        let a = Matrix::from_rows(&[vec![1.0, 0.0]]);
        let b = Matrix::from_rows(&[vec![0.0, 1.0]]);
        let out = concat_rows(&[&a, &b]);
        assert_eq!(out, Matrix::from_rows(&[vec![1.0, 0.0], vec![0.0, 1.0]]));
        assert_eq!(concat_rows(&[&a]), a);
    }

    #[test]
    #[should_panic(expected = "column mismatch")]
    fn concat_rows_rejects_column_mismatch() {
        concat_rows(&[&Matrix::zeros(1, 2), &Matrix::zeros(1, 3)]);
    }

    #[test]
    fn mean_except_two_modalities_returns_the_other() {
        let a = Matrix::from_rows(&[vec![0.25, -1.5]]);
        let b = Matrix::from_rows(&[vec![3.0, 0.125]]);
        assert_eq!(mean_except(&[&a, &b], 0, None), b);
        assert_eq!(mean_except(&[&a, &b], 1, None), a);
    }

    #[test]
    fn mean_except_identical_inputs() {
        let c = Matrix::from_rows(&[vec![0.5, 2.0], vec![-1.0, 0.0]]);
        assert_eq!(mean_except(&[&c, &c, &c], 1, None), c);
    }

    #[test]
    fn mean_except_hand_value_and_cost() {
        let a = Matrix::from_rows(&[vec![0.0, 1.0]]);
        let b = Matrix::from_rows(&[vec![1.0, 1.0]]);
        let x = Matrix::from_rows(&[vec![9.0, 9.0]]);
        let counter = FlopCounter::new();
        counter.set_phase(Phase::Averaging);
        let out = mean_except(&[&a, &b, &x], 2, Some(&counter));
        assert_eq!(out, Matrix::from_rows(&[vec![0.5, 1.0]]));
        // (k-1)*n*d adds + n*d divides = 2*2 + 2
        assert_eq!(counter.total(), 6);
    }

    #[test]
    #[should_panic(expected = "at least two modalities")]
    fn mean_except_requires_two() {
        mean_except(&[&Matrix::zeros(1, 1)], 0, None);
    }

    #[test]
    fn rng_same_seed_same_stream() {
        let mut a = Rng::seeded(42);
        let mut b = Rng::seeded(42);
        for _ in 0..100 {
            assert_eq!(a.uniform(0.0, 1.0), b.uniform(0.0, 1.0));
        }
    }

    #[test]
    fn rng_uniform_mean() {
        let mut rng = Rng::seeded(1);
        let n = 100_000;
        let mean = (0..n).map(|_| rng.uniform(0.0, 1.0)).sum::<f64>() / n as f64;
        assert!((mean - 0.5).abs() < 0.01, "mean {mean}");
    }

    #[test]
    fn rng_shuffle_single_element() {
        let mut rng = Rng::seeded(3);
        let mut xs = vec![7];
        rng.shuffle(&mut xs);
        assert_eq!(xs, vec![7]);
    }

    #[test]
    #[should_panic(expected = "lo < hi")]
    fn rng_uniform_rejects_bad_bounds() {
        Rng::seeded(0).uniform(1.0, 1.0);
    }

    proptest! {
        #[test]
        fn softmax_rows_sum_to_one(rows in 1usize..5, cols in 1usize..6, seed in 0u64..1000, mag in prop::sample::select(vec![1.0, 100.0, 700.0])) {
            let mut rng = Rng::seeded(seed);
            let m = rng.matrix(rows, cols, -mag, mag);
            let s = softmax_rows(&m, None);
            for r in 0..rows {
                let sum: f64 = s.row(r).iter().sum();
                prop_assert!((sum - 1.0).abs() < 1e-12);
                prop_assert!(s.row(r).iter().all(|&v| v >= 0.0));
            }
        }

        #[test]
        fn concat_split_roundtrip(rows_a in 1usize..4, rows_b in 1usize..4, cols in 1usize..5, seed in 0u64..1000) {
            let mut rng = Rng::seeded(seed);
            let m = rng.matrix(rows_a + rows_b, cols, -1.0, 1.0);
            let a = Matrix::from_vec(rows_a, cols, m.data()[..rows_a * cols].to_vec());
            let b = Matrix::from_vec(rows_b, cols, m.data()[rows_a * cols..].to_vec());
            prop_assert_eq!(concat_rows(&[&a, &b]), m);
        }

        #[test]
        fn matmul_associative_within_tolerance(seed in 0u64..500) {
            let mut rng = Rng::seeded(seed);
            let a = rng.matrix(3, 4, -1.0, 1.0);
            let b = rng.matrix(4, 2, -1.0, 1.0);
            let c = rng.matrix(2, 5, -1.0, 1.0);
            let left = a.matmul(&b, None).matmul(&c, None);
            let right = a.matmul(&b.matmul(&c, None), None);
            let denom = left.data().iter().fold(1e-12_f64, |m, v| m.max(v.abs()));
            prop_assert!(left.max_abs_diff(&right) / denom < 1e-9);
        }

        #[test]
        fn mean_except_permutation_invariant(seed in 0u64..500, k in 2usize..6) {
            let mut rng = Rng::seeded(seed);
            let ms: Vec<Matrix> = (0..k).map(|_| rng.matrix(2, 3, -1.0, 1.0)).collect();
            let refs: Vec<&Matrix> = ms.iter().collect();
            let base = mean_except(&refs, 0, None);
            // Permute the list while tracking the excluded element.
            let mut order: Vec<usize> = (0..k).collect();
            rng.shuffle(&mut order);
            let permuted: Vec<&Matrix> = order.iter().map(|&j| &ms[j]).collect();
            let excluded = order.iter().position(|&j| j == 0).unwrap();
            let permuted_mean = mean_except(&permuted, excluded, None);
            prop_assert!(base.max_abs_diff(&permuted_mean) < 1e-12);
        }
    }
}

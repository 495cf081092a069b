//! Tape-based reverse-mode differentiation over the numerics op set.
//!
//! A [`Tape`] records one forward computation; [`Tape::backward`] visits the
//! nodes in reverse creation order (which is a reverse topological order)
//! exactly once. Constants created with [`Tape::constant`] are detached and
//! never receive gradient storage. A tape is single-threaded; distinct tapes
//! may run concurrently.

use crate::flops::FlopCounter;
use crate::numerics::{concat_cols, concat_rows, mean_except, softmax_rows, Matrix};

/// Handle to a node on a tape.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Var(usize);

#[derive(Debug, Clone)]
enum Op {
    Constant,
    Leaf,
    MatMul(usize, usize),
    /// a . b^T
    MatMulNt(usize, usize),
    Add(usize, usize),
    Sub(usize, usize),
    MulElem(usize, usize),
    /// (matrix, 1-row bias)
    AddRowBroadcast(usize, usize),
    Scale(usize, f64),
    SoftmaxRows(usize),
    Relu(usize),
    Reshape(usize),
    ConcatRows(Vec<usize>),
    ConcatCols(Vec<usize>),
    /// (all parents, excluded index)
    MeanExcept(Vec<usize>, usize),
    /// Scalar sum of all entries.
    Sum(usize),
    /// (logits, class label)
    CrossEntropy(usize, usize),
}

struct Node {
    value: Matrix,
    op: Op,
    requires_grad: bool,
}

/// A recorded forward computation. Forward kernels count FLOPs into the
/// optional counter; the backward pass is not counted.
pub struct Tape<'c> {
    nodes: Vec<Node>,
    grads: Vec<Option<Matrix>>,
    counter: Option<&'c FlopCounter>,
}

impl<'c> Tape<'c> {
    pub fn new() -> Self {
        Self::with_counter(None)
    }

    pub fn with_counter(counter: Option<&'c FlopCounter>) -> Self {
        Tape { nodes: Vec::new(), grads: Vec::new(), counter }
    }

    fn push(&mut self, value: Matrix, op: Op, requires_grad: bool) -> Var {
        self.nodes.push(Node { value, op, requires_grad });
        self.grads.push(None);
        Var(self.nodes.len() - 1)
    }

    fn requires(&self, v: Var) -> bool {
        self.nodes[v.0].requires_grad
    }

    pub fn value(&self, v: Var) -> &Matrix {
        &self.nodes[v.0].value
    }

    pub fn counter(&self) -> Option<&'c FlopCounter> {
        self.counter
    }

    /// Gradient of the last `backward` target with respect to `v`, if `v`
    /// participates in differentiation.
    pub fn grad(&self, v: Var) -> Option<&Matrix> {
        self.grads[v.0].as_ref()
    }

    /// Detached input: treated as a constant, receives no gradient storage.
    pub fn constant(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Constant, false)
    }

    /// Differentiable input (a parameter binding).
    pub fn leaf(&mut self, m: Matrix) -> Var {
        self.push(m, Op::Leaf, true)
    }

    pub fn matmul(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.matmul(&self.nodes[b.0].value, self.counter);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::MatMul(a.0, b.0), req)
    }

    /// a . b^T
    pub fn matmul_nt(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.matmul_nt(&self.nodes[b.0].value, self.counter);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::MatMulNt(a.0, b.0), req)
    }

    pub fn add(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.add(&self.nodes[b.0].value, self.counter);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Add(a.0, b.0), req)
    }

    pub fn sub(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.sub(&self.nodes[b.0].value, self.counter);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::Sub(a.0, b.0), req)
    }

    pub fn mul_elem(&mut self, a: Var, b: Var) -> Var {
        let value = self.nodes[a.0].value.mul_elem(&self.nodes[b.0].value, self.counter);
        let req = self.requires(a) || self.requires(b);
        self.push(value, Op::MulElem(a.0, b.0), req)
    }

    pub fn add_row_broadcast(&mut self, a: Var, bias: Var) -> Var {
        let value = self.nodes[a.0].value.add_row_broadcast(&self.nodes[bias.0].value, self.counter);
        let req = self.requires(a) || self.requires(bias);
        self.push(value, Op::AddRowBroadcast(a.0, bias.0), req)
    }

    pub fn scale(&mut self, a: Var, factor: f64) -> Var {
        let value = self.nodes[a.0].value.scale(factor, self.counter);
        let req = self.requires(a);
        self.push(value, Op::Scale(a.0, factor), req)
    }

    pub fn softmax_rows(&mut self, a: Var) -> Var {
        let value = softmax_rows(&self.nodes[a.0].value, self.counter);
        let req = self.requires(a);
        self.push(value, Op::SoftmaxRows(a.0), req)
    }

    pub fn relu(&mut self, a: Var) -> Var {
        if let Some(c) = self.counter {
            let (r, cl) = self.nodes[a.0].value.shape();
            c.add((r * cl) as u64);
        }
        let mut value = self.nodes[a.0].value.clone();
        for v in value.data_mut() {
            if *v < 0.0 {
                *v = 0.0;
            }
        }
        let req = self.requires(a);
        self.push(value, Op::Relu(a.0), req)
    }

    pub fn reshape(&mut self, a: Var, rows: usize, cols: usize) -> Var {
        let value = self.nodes[a.0].value.reshape(rows, cols);
        let req = self.requires(a);
        self.push(value, Op::Reshape(a.0), req)
    }

    pub fn concat_rows(&mut self, vars: &[Var]) -> Var {
        let ms: Vec<&Matrix> = vars.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = concat_rows(&ms);
        let req = vars.iter().any(|&v| self.requires(v));
        self.push(value, Op::ConcatRows(vars.iter().map(|v| v.0).collect()), req)
    }

    pub fn concat_cols(&mut self, vars: &[Var]) -> Var {
        let ms: Vec<&Matrix> = vars.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = concat_cols(&ms);
        let req = vars.iter().any(|&v| self.requires(v));
        self.push(value, Op::ConcatCols(vars.iter().map(|v| v.0).collect()), req)
    }

    /// Mean of every parent except index `i`.
    pub fn mean_except(&mut self, vars: &[Var], i: usize) -> Var {
        let ms: Vec<&Matrix> = vars.iter().map(|v| &self.nodes[v.0].value).collect();
        let value = mean_except(&ms, i, self.counter);
        let req = vars.iter().enumerate().any(|(j, &v)| j != i && self.requires(v));
        self.push(value, Op::MeanExcept(vars.iter().map(|v| v.0).collect(), i), req)
    }

    /// Scalar (1x1) sum of all entries.
    pub fn sum(&mut self, a: Var) -> Var {
        let m = &self.nodes[a.0].value;
        if let Some(c) = self.counter {
            c.add((m.rows() * m.cols()) as u64);
        }
        let value = Matrix::from_vec(1, 1, vec![m.data().iter().sum()]);
        let req = self.requires(a);
        self.push(value, Op::Sum(a.0), req)
    }

    /// Numerically stabilized -log softmax(logits)[label]; logits must be a
    /// single row and the label in range.
    pub fn cross_entropy(&mut self, logits: Var, label: usize) -> Var {
        let m = &self.nodes[logits.0].value;
        assert_eq!(m.rows(), 1, "cross_entropy expects a 1x{} logits row, got {}x{}", m.cols(), m.rows(), m.cols());
        assert!(label < m.cols(), "label {label} out of range for {} classes", m.cols());
        let row = m.row(0);
        let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
        let lse = max + row.iter().map(|&v| (v - max).exp()).sum::<f64>().ln();
        let loss = lse - row[label];
        if let Some(c) = self.counter {
            c.add(5 * m.cols() as u64);
        }
        let req = self.requires(logits);
        self.push(Matrix::from_vec(1, 1, vec![loss]), Op::CrossEntropy(logits.0, label), req)
    }

    /// Accumulates d(loss)/d(node) for every differentiable node reachable
    /// from `loss`. Gradients from any previous backward call are cleared.
    pub fn backward(&mut self, loss: Var) {
        let shape = self.nodes[loss.0].value.shape();
        assert_eq!(shape, (1, 1), "backward target must be scalar, got {}x{}", shape.0, shape.1);
        for g in &mut self.grads {
            *g = None;
        }
        self.grads[loss.0] = Some(Matrix::from_vec(1, 1, vec![1.0]));
        for idx in (0..=loss.0).rev() {
            if !self.nodes[idx].requires_grad {
                continue;
            }
            let Some(g) = self.grads[idx].take() else { continue };
            self.propagate(idx, &g);
            self.grads[idx] = Some(g);
        }
    }

    fn accumulate(&mut self, target: usize, delta: Matrix) {
        if !self.nodes[target].requires_grad {
            return;
        }
        match &mut self.grads[target] {
            Some(g) => *g = g.add(&delta, None),
            slot => *slot = Some(delta),
        }
    }

    fn propagate(&mut self, idx: usize, g: &Matrix) {
        match self.nodes[idx].op.clone() {
            Op::Constant | Op::Leaf => {}
            Op::MatMul(a, b) => {
                let da = g.matmul_nt(&self.nodes[b].value, None);
                let db = self.nodes[a].value.transpose().matmul(g, None);
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::MatMulNt(a, b) => {
                let da = g.matmul(&self.nodes[b].value, None);
                let db = g.transpose().matmul(&self.nodes[a].value, None);
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::Add(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.clone());
            }
            Op::Sub(a, b) => {
                self.accumulate(a, g.clone());
                self.accumulate(b, g.scale(-1.0, None));
            }
            Op::MulElem(a, b) => {
                let da = g.mul_elem(&self.nodes[b].value, None);
                let db = g.mul_elem(&self.nodes[a].value, None);
                self.accumulate(a, da);
                self.accumulate(b, db);
            }
            Op::AddRowBroadcast(a, bias) => {
                self.accumulate(a, g.clone());
                let mut col_sum = Matrix::zeros(1, g.cols());
                for r in 0..g.rows() {
                    for c in 0..g.cols() {
                        let v = col_sum.get(0, c) + g.get(r, c);
                        col_sum.set(0, c, v);
                    }
                }
                self.accumulate(bias, col_sum);
            }
            Op::Scale(a, factor) => {
                self.accumulate(a, g.scale(factor, None));
            }
            Op::SoftmaxRows(a) => {
                let y = &self.nodes[idx].value;
                let mut dx = Matrix::zeros(y.rows(), y.cols());
                for r in 0..y.rows() {
                    let dot: f64 = y.row(r).iter().zip(g.row(r)).map(|(&yv, &gv)| yv * gv).sum();
                    for c in 0..y.cols() {
                        dx.set(r, c, y.get(r, c) * (g.get(r, c) - dot));
                    }
                }
                self.accumulate(a, dx);
            }
            Op::Relu(a) => {
                let x = &self.nodes[a].value;
                let mut dx = g.clone();
                for (dv, &xv) in dx.data_mut().iter_mut().zip(x.data()) {
                    if xv <= 0.0 {
                        *dv = 0.0;
                    }
                }
                self.accumulate(a, dx);
            }
            Op::Reshape(a) => {
                let (r, c) = self.nodes[a].value.shape();
                self.accumulate(a, g.reshape(r, c));
            }
            Op::ConcatRows(parents) => {
                let mut offset = 0;
                for p in parents {
                    let (pr, pc) = self.nodes[p].value.shape();
                    let slice = g.data()[offset * pc..(offset + pr) * pc].to_vec();
                    self.accumulate(p, Matrix::from_vec(pr, pc, slice));
                    offset += pr;
                }
            }
            Op::ConcatCols(parents) => {
                let mut offset = 0;
                for p in parents {
                    let (pr, pc) = self.nodes[p].value.shape();
                    let mut dp = Matrix::zeros(pr, pc);
                    for r in 0..pr {
                        for c in 0..pc {
                            dp.set(r, c, g.get(r, offset + c));
                        }
                    }
                    self.accumulate(p, dp);
                    offset += pc;
                }
            }
            Op::MeanExcept(parents, excluded) => {
                let share = g.scale(1.0 / (parents.len() - 1) as f64, None);
                for (j, p) in parents.into_iter().enumerate() {
                    if j != excluded {
                        self.accumulate(p, share.clone());
                    }
                }
            }
            Op::Sum(a) => {
                let (r, c) = self.nodes[a].value.shape();
                let v = g.get(0, 0);
                self.accumulate(a, Matrix::from_vec(r, c, vec![v; r * c]));
            }
            Op::CrossEntropy(logits, label) => {
                let p = softmax_rows(&self.nodes[logits].value, None);
                let mut dl = p.scale(g.get(0, 0), None);
                let v = dl.get(0, label) - g.get(0, 0);
                dl.set(0, label, v);
                self.accumulate(logits, dl);
            }
        }
    }
}

impl Default for Tape<'_> {
    fn default() -> Self {
        Self::new()
    }
}

/// A named trainable weight with accumulated gradient storage.
#[derive(Debug, Clone)]
pub struct Parameter {
    pub name: String,
    pub value: Matrix,
    pub grad: Matrix,
}

impl Parameter {
    pub fn new(name: impl Into<String>, value: Matrix) -> Self {
        let grad = Matrix::zeros(value.rows(), value.cols());
        Parameter { name: name.into(), value, grad }
    }

    pub fn zero_grad(&mut self) {
        self.grad = Matrix::zeros(self.value.rows(), self.value.cols());
    }
}

/// Relative-error metric used by gradient checks: |a-b| / max(1e-8, |a|+|b|).
pub fn relative_error(a: f64, b: f64) -> f64 {
    (a - b).abs() / (1e-8_f64).max(a.abs() + b.abs())
}

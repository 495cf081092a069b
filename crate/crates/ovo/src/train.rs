//! Mini-batch training with Adam and early stopping, evaluation (accuracy,
//! macro-F1), the ten-seed mean ± std protocol, Welch's t-test, and a small
//! hyperparameter grid search.

use std::time::Instant;

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::flops::{self, FlopCounter};
use crate::fusion::{FusionConfig, FusionModel};
use crate::numerics::{Matrix, Rng};
use crate::simdata::SimSample;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub max_epochs: usize,
    pub patience: usize,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig { learning_rate: 1e-3, batch_size: 32, max_epochs: 200, patience: 5, seed: 0 }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "learning rate must be positive and finite, got {}",
                self.learning_rate
            )));
        }
        if self.batch_size < 1 {
            return Err(Error::InvalidConfig("batch size must be at least 1".into()));
        }
        if self.patience < 1 {
            return Err(Error::InvalidConfig("patience must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub train_loss: f64,
    pub val_accuracy: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct RunResult {
    pub epochs: Vec<EpochRecord>,
    /// 1-based epoch whose weights were restored; 0 when no epoch ran.
    pub best_epoch: usize,
    pub best_val_accuracy: f64,
    pub test_accuracy: f64,
    pub test_f1: f64,
    /// Forward-pass FLOPs spent on training batches.
    pub train_flops: u64,
    pub wall_ns: u64,
}

/// Adam with bias correction; state is index-aligned with the model's
/// parameter list.
pub struct AdamState {
    m: Vec<Matrix>,
    v: Vec<Matrix>,
    t: u32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamState {
    pub fn new(model: &FusionModel) -> Self {
        let zeros: Vec<Matrix> =
            model.params.iter().map(|p| Matrix::zeros(p.value.rows(), p.value.cols())).collect();
        AdamState { m: zeros.clone(), v: zeros, t: 0, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }

    /// One update over `model.params`, consuming the gradients stored on
    /// each parameter.
    pub fn step(&mut self, model: &mut FusionModel, lr: f64) {
        assert_eq!(self.m.len(), model.params.len(), "Adam state/model mismatch");
        self.t += 1;
        let bc1 = 1.0 - self.beta1.powi(self.t as i32);
        let bc2 = 1.0 - self.beta2.powi(self.t as i32);
        for (i, p) in model.params.iter_mut().enumerate() {
            assert_eq!(self.m[i].shape(), p.value.shape(), "Adam state shape mismatch for {}", p.name);
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let g = p.grad.data();
            let w = p.value.data_mut();
            for j in 0..w.len() {
                m[j] = self.beta1 * m[j] + (1.0 - self.beta1) * g[j];
                v[j] = self.beta2 * v[j] + (1.0 - self.beta2) * g[j] * g[j];
                let m_hat = m[j] / bc1;
                let v_hat = v[j] / bc2;
                w[j] -= lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}

/// Accuracy and macro-F1 over (prediction, label) pairs.
pub fn scores(preds: &[usize], labels: &[usize], classes: usize) -> (f64, f64) {
    assert_eq!(preds.len(), labels.len());
    assert!(!preds.is_empty(), "cannot evaluate an empty set");
    let correct = preds.iter().zip(labels).filter(|(p, l)| p == l).count();
    let accuracy = correct as f64 / preds.len() as f64;
    let mut f1_sum = 0.0;
    for c in 0..classes {
        let tp = preds.iter().zip(labels).filter(|&(&p, &l)| p == c && l == c).count() as f64;
        let fp = preds.iter().zip(labels).filter(|&(&p, &l)| p == c && l != c).count() as f64;
        let fn_ = preds.iter().zip(labels).filter(|&(&p, &l)| p != c && l == c).count() as f64;
        let precision = if tp + fp > 0.0 { tp / (tp + fp) } else { 0.0 };
        let recall = if tp + fn_ > 0.0 { tp / (tp + fn_) } else { 0.0 };
        f1_sum += if precision + recall > 0.0 {
            2.0 * precision * recall / (precision + recall)
        } else {
            0.0
        };
    }
    (accuracy, f1_sum / classes as f64)
}

pub fn evaluate(model: &FusionModel, set: &[SimSample]) -> (f64, f64) {
    let preds: Vec<usize> = set.iter().map(|s| model.predict(&s.modality_vectors)).collect();
    let labels: Vec<usize> = set.iter().map(|s| s.label).collect();
    scores(&preds, &labels, model.config.classes)
}

/// Train in place. Seeded shuffling per epoch; early stopping after
/// `patience` epochs without a strict validation-accuracy improvement; the
/// best epoch's weights are restored before returning. Test metrics are left
/// at zero for the caller (`run_seed`) to fill.
pub fn fit(
    model: &mut FusionModel,
    train_set: &[SimSample],
    val_set: &[SimSample],
    cfg: &TrainConfig,
) -> Result<RunResult> {
    cfg.validate()?;
    if train_set.is_empty() || val_set.is_empty() {
        return Err(Error::InvalidConfig("train and validation sets must be nonempty".into()));
    }
    let start = Instant::now();
    let counter = FlopCounter::new();
    let mut shuffle_rng = Rng::seeded(cfg.seed);
    let mut epochs = Vec::new();
    let mut best_epoch = 0usize;
    let mut best_val = f64::NEG_INFINITY;
    let mut best_weights: Option<Vec<Matrix>> = None;
    let mut since_improvement = 0usize;
    let mut adam = AdamState::new(model);
    let mut order: Vec<usize> = (0..train_set.len()).collect();

    for epoch in 1..=cfg.max_epochs {
        shuffle_rng.shuffle(&mut order);
        let mut loss_sum = 0.0;
        for (batch_idx, chunk) in order.chunks(cfg.batch_size).enumerate() {
            let batch: Vec<(&[Vec<f64>], usize)> = chunk
                .iter()
                .map(|&i| (train_set[i].modality_vectors.as_slice(), train_set[i].label))
                .collect();
            let mut tape = crate::autograd::Tape::with_counter(Some(&counter));
            let vars = model.bind(&mut tape, true);
            let loss = model.batch_loss_on_tape(&mut tape, &vars, &batch);
            let loss_val = tape.value(loss).get(0, 0);
            if !loss_val.is_finite() {
                return Err(Error::NonFinite(format!(
                    "training loss became non-finite at epoch {epoch}, batch {batch_idx}"
                )));
            }
            loss_sum += loss_val * chunk.len() as f64;
            tape.backward(loss);
            for (p, &v) in model.params.iter_mut().zip(&vars) {
                p.grad = tape.grad(v).expect("trainable parameter missing gradient").clone();
            }
            adam.step(model, cfg.learning_rate);
        }
        let train_loss = loss_sum / train_set.len() as f64;
        let (val_accuracy, _) = evaluate(model, val_set);
        epochs.push(EpochRecord { epoch, train_loss, val_accuracy });

        if val_accuracy > best_val {
            best_val = val_accuracy;
            best_epoch = epoch;
            best_weights = Some(model.params.iter().map(|p| p.value.clone()).collect());
            since_improvement = 0;
        } else {
            since_improvement += 1;
            if since_improvement >= cfg.patience {
                break;
            }
        }
    }

    if let Some(weights) = best_weights {
        for (p, w) in model.params.iter_mut().zip(weights) {
            p.value = w;
        }
    } else {
        best_val = evaluate(model, val_set).0;
    }

    Ok(RunResult {
        epochs,
        best_epoch,
        best_val_accuracy: best_val,
        test_accuracy: 0.0,
        test_f1: 0.0,
        train_flops: counter.total(),
        wall_ns: start.elapsed().as_nanos() as u64,
    })
}

/// One seeded run: build the model from `cfg.seed`, fit, evaluate on test.
pub fn run_seed(
    model_cfg: FusionConfig,
    train_set: &[SimSample],
    val_set: &[SimSample],
    test_set: &[SimSample],
    cfg: &TrainConfig,
) -> Result<(FusionModel, RunResult)> {
    let mut model = FusionModel::new(model_cfg, cfg.seed)?;
    let mut result = fit(&mut model, train_set, val_set, cfg)?;
    if !test_set.is_empty() {
        let (acc, f1) = evaluate(&model, test_set);
        result.test_accuracy = acc;
        result.test_f1 = f1;
    }
    Ok((model, result))
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Aggregate {
    pub seeds: Vec<u64>,
    pub mean_test_accuracy: f64,
    pub std_test_accuracy: f64,
    pub mean_test_f1: f64,
    pub std_test_f1: f64,
    pub per_seed_test_accuracy: Vec<f64>,
    pub per_seed_test_f1: Vec<f64>,
}

pub fn mean_std(values: &[f64]) -> (f64, f64) {
    assert!(!values.is_empty());
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    if values.len() < 2 {
        return (mean, 0.0);
    }
    let var = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0);
    (mean, var.sqrt())
}

/// Independent runs over the given seeds; sample mean and sample standard
/// deviation per metric.
pub fn multi_seed(
    model_cfg: FusionConfig,
    train_set: &[SimSample],
    val_set: &[SimSample],
    test_set: &[SimSample],
    base_cfg: &TrainConfig,
    seeds: &[u64],
) -> Result<(Aggregate, Vec<RunResult>)> {
    if seeds.len() < 2 {
        return Err(Error::InvalidConfig("multi-seed protocol needs at least two seeds".into()));
    }
    let mut runs = Vec::with_capacity(seeds.len());
    for &seed in seeds {
        let cfg = TrainConfig { seed, ..*base_cfg };
        let (_, result) = run_seed(model_cfg, train_set, val_set, test_set, &cfg)?;
        runs.push(result);
    }
    let acc: Vec<f64> = runs.iter().map(|r| r.test_accuracy).collect();
    let f1: Vec<f64> = runs.iter().map(|r| r.test_f1).collect();
    let (mean_acc, std_acc) = mean_std(&acc);
    let (mean_f1, std_f1) = mean_std(&f1);
    Ok((
        Aggregate {
            seeds: seeds.to_vec(),
            mean_test_accuracy: mean_acc,
            std_test_accuracy: std_acc,
            mean_test_f1: mean_f1,
            std_test_f1: std_f1,
            per_seed_test_accuracy: acc,
            per_seed_test_f1: f1,
        },
        runs,
    ))
}

/// Two-sided p-value for a Student-t statistic at the given degrees of
/// freedom.
pub fn students_t_p(t: f64, dof: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof).expect("valid dof");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

/// Two-sample Welch t-test with the Welch–Satterthwaite degrees of freedom.
/// Conventions for degenerate variance: both groups constant and equal means
/// gives (0, 1); constant but different means gives (±inf, 0).
pub fn t_test(group_a: &[f64], group_b: &[f64]) -> Result<(f64, f64)> {
    if group_a.len() < 2 || group_b.len() < 2 {
        return Err(Error::InvalidConfig("each t-test group needs at least two values".into()));
    }
    let (ma, sa) = mean_std(group_a);
    let (mb, sb) = mean_std(group_b);
    let (va, vb) = (sa * sa, sb * sb);
    let (na, nb) = (group_a.len() as f64, group_b.len() as f64);
    if va == 0.0 && vb == 0.0 {
        return Ok(if ma == mb {
            (0.0, 1.0)
        } else {
            ((ma - mb).signum() * f64::INFINITY, 0.0)
        });
    }
    let se2 = va / na + vb / nb;
    let t = (ma - mb) / se2.sqrt();
    let dof = se2 * se2
        / ((va / na).powi(2) / (na - 1.0) + (vb / nb).powi(2) / (nb - 1.0));
    Ok((t, students_t_p(t, dof)))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridPoint {
    pub learning_rate: f64,
    pub batch_size: usize,
    pub heads: usize,
}

/// Desk-scale default sweep: lr x batch x heads.
pub fn default_grid() -> Vec<GridPoint> {
    let mut grid = Vec::new();
    for &lr in &[1e-2, 1e-3, 1e-4] {
        for &batch in &[16usize, 32] {
            for &heads in &[1usize, 2, 4] {
                grid.push(GridPoint { learning_rate: lr, batch_size: batch, heads });
            }
        }
    }
    grid
}

/// One model per grid point; the winner has the best validation accuracy,
/// ties broken by lower integration-stage FLOP delta, then lower learning
/// rate.
pub fn grid_search(
    base_model_cfg: FusionConfig,
    train_set: &[SimSample],
    val_set: &[SimSample],
    base_cfg: &TrainConfig,
    grid: &[GridPoint],
) -> Result<(GridPoint, f64)> {
    if grid.is_empty() {
        return Err(Error::InvalidConfig("hyperparameter grid must be nonempty".into()));
    }
    let mut best: Option<(GridPoint, f64, u64)> = None;
    for point in grid {
        let model_cfg = FusionConfig { h: point.heads, ..base_model_cfg };
        let cfg = TrainConfig {
            learning_rate: point.learning_rate,
            batch_size: point.batch_size,
            ..*base_cfg
        };
        let mut model = FusionModel::new(model_cfg, cfg.seed)?;
        let result = fit(&mut model, train_set, val_set, &cfg)?;
        let delta = flops::delta_flops(
            model_cfg.scheme,
            model_cfg.k as u64,
            model_cfg.n as u64,
            model_cfg.d as u64,
            model_cfg.h as u64,
        );
        let better = match &best {
            None => true,
            Some((b_point, b_acc, b_delta)) => {
                result.best_val_accuracy > *b_acc
                    || (result.best_val_accuracy == *b_acc
                        && (delta < *b_delta
                            || (delta == *b_delta && point.learning_rate < b_point.learning_rate)))
            }
        };
        if better {
            best = Some((*point, result.best_val_accuracy, delta));
        }
    }
    let (point, acc, _) = best.unwrap();
    Ok((point, acc))
}

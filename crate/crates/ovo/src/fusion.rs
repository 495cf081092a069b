//! End-to-end fusion pipelines: per-modality encoders, an equalizing linear
//! layer (present for every scheme, including the concatenation baseline, so
//! that FLOP deltas isolate the integration stage), a scheme-specific
//! integration stage, and a classifier head.
//!
//! The forward pass is recorded on an autograd tape so the same code path
//! serves inference, FLOP measurement and training. All schemes share the
//! fused width k*n*d, so encoder and classifier shapes are identical across
//! schemes; models built from the same seed share those initializations
//! exactly and differ only in integration parameters.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::autograd::{relative_error, Parameter, Tape, Var};
use crate::flops::{FlopCounter, Phase};
use crate::numerics::{Matrix, Rng};
use crate::{Error, Result};

/// Integration scheme under comparison.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Scheme {
    Concat,
    EarlySelf,
    CrossPairwise,
    Ovo,
}

impl Scheme {
    pub const ALL: [Scheme; 4] = [Scheme::Concat, Scheme::EarlySelf, Scheme::CrossPairwise, Scheme::Ovo];

    pub fn name(self) -> &'static str {
        match self {
            Scheme::Concat => "concat",
            Scheme::EarlySelf => "early-self",
            Scheme::CrossPairwise => "cross-pairwise",
            Scheme::Ovo => "ovo",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "concat" => Ok(Scheme::Concat),
            "early-self" => Ok(Scheme::EarlySelf),
            "cross-pairwise" | "cross" => Ok(Scheme::CrossPairwise),
            "ovo" => Ok(Scheme::Ovo),
            other => Err(Error::InvalidConfig(format!(
                "unknown scheme '{other}' (expected concat, early-self, cross-pairwise or ovo)"
            ))),
        }
    }
}

/// Architecture of a fusion model.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FusionConfig {
    pub scheme: Scheme,
    /// Modality count.
    pub k: usize,
    /// Raw input features per modality.
    pub raw_dim: usize,
    /// Tokens per modality embedding.
    pub n: usize,
    /// Model dim.
    pub d: usize,
    /// Attention heads.
    pub h: usize,
    /// Output classes.
    pub classes: usize,
}

impl FusionConfig {
    pub fn validate(&self) -> Result<()> {
        let positive = [self.k, self.raw_dim, self.n, self.d, self.h, self.classes];
        if positive.iter().any(|&v| v == 0) {
            return Err(Error::InvalidConfig("all config values must be positive".into()));
        }
        if self.scheme != Scheme::Concat && self.k < 2 {
            return Err(Error::InvalidConfig(format!(
                "scheme {} requires at least two modalities, got k={}",
                self.scheme, self.k
            )));
        }
        if self.d % self.h != 0 {
            return Err(Error::InvalidConfig(format!(
                "model dim {} not divisible by head count {}",
                self.d, self.h
            )));
        }
        Ok(())
    }

    /// Width of the fused vector fed to the classifier: k*n*d for every scheme.
    pub fn fused_width(&self) -> usize {
        self.k * self.n * self.d
    }
}

/// A fusion model: a flat, name-addressed parameter list plus its config.
#[derive(Debug, Clone)]
pub struct FusionModel {
    pub config: FusionConfig,
    pub params: Vec<Parameter>,
}

impl FusionModel {
    /// Seeded initialization, uniform(-1/sqrt(fan_in), +1/sqrt(fan_in)) per
    /// tensor. Shared stages (encoders, equalizers, classifier) are drawn
    /// before integration parameters, in a fixed order, so models for
    /// different schemes built from the same seed share them exactly.
    pub fn new(config: FusionConfig, seed: u64) -> Result<Self> {
        config.validate()?;
        let mut rng = Rng::seeded(seed);
        let mut params = Vec::new();
        let FusionConfig { k, raw_dim, n, d, h, classes, .. } = config;
        let nd = n * d;

        let linear = |rng: &mut Rng, params: &mut Vec<Parameter>, name: String, rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            params.push(Parameter::new(name.clone() + ".weight", rng.matrix(rows, cols, -bound, bound)));
            params.push(Parameter::new(name + ".bias", rng.matrix(1, cols, -bound, bound)));
        };

        for i in 0..k {
            linear(&mut rng, &mut params, format!("encoder.{i}"), raw_dim, nd);
        }
        for i in 0..k {
            linear(&mut rng, &mut params, format!("equalizer.{i}"), d, d);
        }
        linear(&mut rng, &mut params, "classifier".to_string(), config.fused_width(), classes);

        let dh = d / h;
        let weight = |rng: &mut Rng, params: &mut Vec<Parameter>, name: String, rows: usize, cols: usize| {
            let bound = 1.0 / (rows as f64).sqrt();
            params.push(Parameter::new(name, rng.matrix(rows, cols, -bound, bound)));
        };
        match config.scheme {
            Scheme::Concat => {}
            Scheme::EarlySelf | Scheme::CrossPairwise => {
                for t in 0..h {
                    weight(&mut rng, &mut params, format!("attention.head{t}.wq"), d, dh);
                    weight(&mut rng, &mut params, format!("attention.head{t}.wk"), d, dh);
                    weight(&mut rng, &mut params, format!("attention.head{t}.wv"), d, dh);
                }
                weight(&mut rng, &mut params, "attention.wo".to_string(), d, d);
            }
            Scheme::Ovo => {
                for i in 0..k {
                    for t in 0..h {
                        weight(&mut rng, &mut params, format!("attention.mod{i}.head{t}.proj"), d, dh);
                    }
                }
                for t in 0..h {
                    weight(&mut rng, &mut params, format!("attention.head{t}.w"), dh, dh);
                }
                weight(&mut rng, &mut params, "attention.wo".to_string(), d, d);
            }
        }
        Ok(FusionModel { config, params })
    }

    pub fn param(&self, name: &str) -> Option<&Parameter> {
        self.params.iter().find(|p| p.name == name)
    }

    pub fn param_mut(&mut self, name: &str) -> Option<&mut Parameter> {
        self.params.iter_mut().find(|p| p.name == name)
    }

    fn index_of(&self, name: &str) -> usize {
        self.params
            .iter()
            .position(|p| p.name == name)
            .unwrap_or_else(|| panic!("no parameter named '{name}'"))
    }

    pub fn zero_grads(&mut self) {
        for p in &mut self.params {
            p.zero_grad();
        }
    }

    /// Bind every parameter onto a tape, index-aligned with `self.params`.
    pub fn bind<'c>(&self, tape: &mut Tape<'c>, trainable: bool) -> Vec<Var> {
        self.params
            .iter()
            .map(|p| {
                if trainable {
                    tape.leaf(p.value.clone())
                } else {
                    tape.constant(p.value.clone())
                }
            })
            .collect()
    }

    /// Encoder plus equalizing layer: raw per-modality feature vectors to k
    /// embeddings of shape (n x d).
    pub fn encode_on_tape(&self, tape: &mut Tape<'_>, vars: &[Var], raw: &[Vec<f64>]) -> Vec<Var> {
        let cfg = &self.config;
        assert_eq!(raw.len(), cfg.k, "expected {} modalities, got {}", cfg.k, raw.len());
        if let Some(c) = tape.counter() {
            c.set_phase(Phase::Projections);
        }
        (0..cfg.k)
            .map(|i| {
                assert_eq!(
                    raw[i].len(),
                    cfg.raw_dim,
                    "modality {i}: expected {} features, got {}",
                    cfg.raw_dim,
                    raw[i].len()
                );
                let x = tape.constant(Matrix::from_vec(1, cfg.raw_dim, raw[i].clone()));
                let w = vars[self.index_of(&format!("encoder.{i}.weight"))];
                let b = vars[self.index_of(&format!("encoder.{i}.bias"))];
                let e = tape.matmul(x, w);
                let e = tape.add(e, b);
                let e = tape.reshape(e, cfg.n, cfg.d);
                let ew = vars[self.index_of(&format!("equalizer.{i}.weight"))];
                let eb = vars[self.index_of(&format!("equalizer.{i}.bias"))];
                let e = tape.matmul(e, ew);
                tape.add_row_broadcast(e, eb)
            })
            .collect()
    }

    /// Scheme-dispatched integration stage. Takes k (n x d) embeddings and
    /// returns the fused 1 x (k*n*d) row.
    pub fn fuse_on_tape(&self, tape: &mut Tape<'_>, vars: &[Var], embeddings: &[Var]) -> Var {
        let cfg = &self.config;
        assert_eq!(embeddings.len(), cfg.k, "expected {} embeddings, got {}", cfg.k, embeddings.len());
        let (k, n, d, h) = (cfg.k, cfg.n, cfg.d, cfg.h);
        let dh = d / h;
        let phase = |tape: &Tape<'_>, p: Phase| {
            if let Some(c) = tape.counter() {
                c.set_phase(p);
            }
        };
        match cfg.scheme {
            Scheme::Concat => {
                let flat: Vec<Var> = embeddings.iter().map(|&e| tape.reshape(e, 1, n * d)).collect();
                tape.concat_cols(&flat)
            }
            Scheme::EarlySelf => {
                let x = tape.concat_rows(embeddings);
                let mut heads = Vec::with_capacity(h);
                for t in 0..h {
                    phase(tape, Phase::Projections);
                    let q = tape.matmul(x, vars[self.index_of(&format!("attention.head{t}.wq"))]);
                    let key = tape.matmul(x, vars[self.index_of(&format!("attention.head{t}.wk"))]);
                    let v = tape.matmul(x, vars[self.index_of(&format!("attention.head{t}.wv"))]);
                    phase(tape, Phase::Scores);
                    let s = tape.matmul_nt(q, key);
                    let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
                    phase(tape, Phase::Softmax);
                    let a = tape.softmax_rows(s);
                    phase(tape, Phase::WeightedSum);
                    heads.push(tape.matmul(a, v));
                }
                let cat = tape.concat_cols(&heads);
                phase(tape, Phase::ConcatOutput);
                let out = tape.matmul(cat, vars[self.index_of("attention.wo")]);
                tape.reshape(out, 1, k * n * d)
            }
            Scheme::CrossPairwise => {
                // Q/K/V once per modality per head, reused across the
                // k(k-1) directional pairs.
                phase(tape, Phase::Projections);
                let mut q = vec![Vec::with_capacity(h); k];
                let mut key = vec![Vec::with_capacity(h); k];
                let mut v = vec![Vec::with_capacity(h); k];
                for (i, &e) in embeddings.iter().enumerate() {
                    for t in 0..h {
                        q[i].push(tape.matmul(e, vars[self.index_of(&format!("attention.head{t}.wq"))]));
                        key[i].push(tape.matmul(e, vars[self.index_of(&format!("attention.head{t}.wk"))]));
                        v[i].push(tape.matmul(e, vars[self.index_of(&format!("attention.head{t}.wv"))]));
                    }
                }
                let wo = vars[self.index_of("attention.wo")];
                let mut fused = Vec::with_capacity(k);
                for i in 0..k {
                    let mut pair_contexts = Vec::with_capacity(k - 1);
                    for j in 0..k {
                        if j == i {
                            continue;
                        }
                        let mut heads = Vec::with_capacity(h);
                        for t in 0..h {
                            phase(tape, Phase::Scores);
                            let s = tape.matmul_nt(q[i][t], key[j][t]);
                            let s = tape.scale(s, 1.0 / (dh as f64).sqrt());
                            phase(tape, Phase::Softmax);
                            let a = tape.softmax_rows(s);
                            phase(tape, Phase::WeightedSum);
                            heads.push(tape.matmul(a, v[j][t]));
                        }
                        pair_contexts.push(tape.concat_cols(&heads));
                    }
                    // Position-invariant output assembly: sum the k-1
                    // directional contexts for query modality i ...
                    phase(tape, Phase::ConcatOutput);
                    let mut acc = pair_contexts[0];
                    for &z in &pair_contexts[1..] {
                        acc = tape.add(acc, z);
                    }
                    // ... then the aggregation projection that merges them
                    // into one n x d context.
                    phase(tape, Phase::Averaging);
                    let out = tape.matmul(acc, wo);
                    fused.push(tape.reshape(out, 1, n * d));
                }
                tape.concat_cols(&fused)
            }
            Scheme::Ovo => {
                let wo = vars[self.index_of("attention.wo")];
                // contexts[i][t]
                let mut contexts = vec![Vec::with_capacity(h); k];
                for t in 0..h {
                    phase(tape, Phase::Projections);
                    let projected: Vec<Var> = (0..k)
                        .map(|i| {
                            tape.matmul(
                                embeddings[i],
                                vars[self.index_of(&format!("attention.mod{i}.head{t}.proj"))],
                            )
                        })
                        .collect();
                    // Running sum over all k projected modalities; each
                    // "others" mean is then one subtract and one divide.
                    phase(tape, Phase::Averaging);
                    let mut total = projected[0];
                    for &p in &projected[1..] {
                        total = tape.add(total, p);
                    }
                    let w_t = vars[self.index_of(&format!("attention.head{t}.w"))];
                    for i in 0..k {
                        phase(tape, Phase::Averaging);
                        let diff = tape.sub(total, projected[i]);
                        let mean = tape.scale(diff, 1.0 / (k - 1) as f64);
                        // m_i * W is a linear projection of the query side;
                        // the score matmul proper stays O(n^2 * d).
                        phase(tape, Phase::Projections);
                        let tm = tape.matmul(projected[i], w_t);
                        phase(tape, Phase::Scores);
                        let score = tape.matmul_nt(tm, mean);
                        phase(tape, Phase::Softmax);
                        let a = tape.softmax_rows(score);
                        phase(tape, Phase::WeightedSum);
                        contexts[i].push(tape.matmul(a, projected[i]));
                    }
                }
                let mut fused = Vec::with_capacity(k);
                for ctx in contexts {
                    let cat = tape.concat_cols(&ctx);
                    phase(tape, Phase::ConcatOutput);
                    let out = tape.matmul(cat, wo);
                    fused.push(tape.reshape(out, 1, n * d));
                }
                tape.concat_cols(&fused)
            }
        }
    }

    /// Classifier head over the fused row.
    pub fn classify_on_tape(&self, tape: &mut Tape<'_>, vars: &[Var], fused: Var) -> Var {
        if let Some(c) = tape.counter() {
            c.set_phase(Phase::Projections);
        }
        let w = vars[self.index_of("classifier.weight")];
        let b = vars[self.index_of("classifier.bias")];
        let logits = tape.matmul(fused, w);
        tape.add(logits, b)
    }

    pub fn logits_on_tape(&self, tape: &mut Tape<'_>, vars: &[Var], raw: &[Vec<f64>]) -> Var {
        let embeddings = self.encode_on_tape(tape, vars, raw);
        let fused = self.fuse_on_tape(tape, vars, &embeddings);
        self.classify_on_tape(tape, vars, fused)
    }

    /// Mean cross-entropy over a batch of (modalities, label) samples.
    pub fn batch_loss_on_tape(
        &self,
        tape: &mut Tape<'_>,
        vars: &[Var],
        batch: &[(&[Vec<f64>], usize)],
    ) -> Var {
        assert!(!batch.is_empty(), "batch must be nonempty");
        let mut total: Option<Var> = None;
        for &(modalities, label) in batch {
            let logits = self.logits_on_tape(tape, vars, modalities);
            let loss = tape.cross_entropy(logits, label);
            total = Some(match total {
                Some(t) => tape.add(t, loss),
                None => loss,
            });
        }
        tape.scale(total.unwrap(), 1.0 / batch.len() as f64)
    }

    /// Inference-only encode.
    pub fn encode(&self, raw: &[Vec<f64>], counter: Option<&FlopCounter>) -> Vec<Matrix> {
        let mut tape = Tape::with_counter(counter);
        let vars = self.bind(&mut tape, false);
        let embeddings = self.encode_on_tape(&mut tape, &vars, raw);
        embeddings.into_iter().map(|e| tape.value(e).clone()).collect()
    }

    /// Inference-only integration stage over pre-encoded embeddings. This is
    /// the unit that the FLOP counter/model equivalence is stated over.
    pub fn fuse(&self, embeddings: &[Matrix], counter: Option<&FlopCounter>) -> Vec<f64> {
        let mut tape = Tape::with_counter(counter);
        let vars = self.bind(&mut tape, false);
        let evars: Vec<Var> = embeddings.iter().map(|e| tape.constant(e.clone())).collect();
        let fused = self.fuse_on_tape(&mut tape, &vars, &evars);
        tape.value(fused).data().to_vec()
    }

    /// Full inference pass: encode, fuse, classify.
    pub fn forward(&self, raw: &[Vec<f64>], counter: Option<&FlopCounter>) -> Vec<f64> {
        let mut tape = Tape::with_counter(counter);
        let vars = self.bind(&mut tape, false);
        let logits = self.logits_on_tape(&mut tape, &vars, raw);
        tape.value(logits).data().to_vec()
    }

    pub fn predict(&self, raw: &[Vec<f64>]) -> usize {
        let logits = self.forward(raw, None);
        logits
            .iter()
            .enumerate()
            .max_by(|a, b| a.1.partial_cmp(b.1).unwrap())
            .map(|(i, _)| i)
            .unwrap()
    }
}

#[derive(Debug, Clone)]
pub struct GradCheckReport {
    /// max over entries of |g_auto - g_fd| / max(1e-8, |g_auto| + |g_fd|)
    pub max_error: f64,
    /// Parameter holding the worst entry.
    pub worst_param: String,
}

/// Central finite-difference gradient check over every parameter entry.
pub fn grad_check(
    model: &mut FusionModel,
    batch: &[(&[Vec<f64>], usize)],
    eps: f64,
) -> Result<GradCheckReport> {
    if !(eps > 0.0) {
        return Err(Error::InvalidConfig(format!("grad-check eps must be positive, got {eps}")));
    }
    if batch.is_empty() {
        return Err(Error::InvalidConfig("grad-check batch must be nonempty".into()));
    }

    let loss_at = |model: &FusionModel| -> f64 {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape, false);
        let loss = model.batch_loss_on_tape(&mut tape, &vars, batch);
        tape.value(loss).get(0, 0)
    };

    // Autograd route.
    let auto: Vec<Matrix> = {
        let mut tape = Tape::new();
        let vars = model.bind(&mut tape, true);
        let loss = model.batch_loss_on_tape(&mut tape, &vars, batch);
        tape.backward(loss);
        vars.iter().map(|&v| tape.grad(v).expect("parameter missing gradient").clone()).collect()
    };

    let mut max_err = 0.0_f64;
    let mut worst = String::new();
    for p_idx in 0..model.params.len() {
        let (rows, cols) = model.params[p_idx].value.shape();
        let name = model.params[p_idx].name.clone();
        for r in 0..rows {
            for c in 0..cols {
                let orig = model.params[p_idx].value.get(r, c);
                model.params[p_idx].value.set(r, c, orig + eps);
                let plus = loss_at(model);
                model.params[p_idx].value.set(r, c, orig - eps);
                let minus = loss_at(model);
                model.params[p_idx].value.set(r, c, orig);
                if !plus.is_finite() || !minus.is_finite() {
                    return Err(Error::NonFinite(format!(
                        "loss non-finite while perturbing parameter '{name}' at ({r},{c})"
                    )));
                }
                let fd = (plus - minus) / (2.0 * eps);
                let err = relative_error(auto[p_idx].get(r, c), fd);
                if err > max_err || worst.is_empty() {
                    max_err = err;
                    worst = name.clone();
                }
            }
        }
    }
    Ok(GradCheckReport { max_error: max_err, worst_param: worst })
}

#[derive(Serialize, Deserialize)]
struct CheckpointFile {
    format: String,
    version: u32,
    config: FusionConfig,
    params: Vec<CheckpointParam>,
}

#[derive(Serialize, Deserialize)]
struct CheckpointParam {
    name: String,
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

const CHECKPOINT_FORMAT: &str = "ovo-fusion-checkpoint";
const CHECKPOINT_VERSION: u32 = 1;

/// Write the model to a single self-describing, versioned flat file
/// (atomically: temp file then rename).
pub fn save_checkpoint(model: &FusionModel, path: &Path) -> Result<()> {
    let file = CheckpointFile {
        format: CHECKPOINT_FORMAT.to_string(),
        version: CHECKPOINT_VERSION,
        config: model.config,
        params: model
            .params
            .iter()
            .map(|p| CheckpointParam {
                name: p.name.clone(),
                rows: p.value.rows(),
                cols: p.value.cols(),
                data: p.value.data().to_vec(),
            })
            .collect(),
    };
    let bytes = serde_json::to_vec_pretty(&file)
        .map_err(|e| Error::Parse(format!("checkpoint serialization failed: {e}")))?;
    crate::cli::write_atomic(path, &bytes)
}

pub fn load_checkpoint(path: &Path) -> Result<FusionModel> {
    let bytes = std::fs::read(path)?;
    let file: CheckpointFile = serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("invalid checkpoint {}: {e}", path.display())))?;
    if file.format != CHECKPOINT_FORMAT {
        return Err(Error::Parse(format!("unrecognized checkpoint format '{}'", file.format)));
    }
    if file.version != CHECKPOINT_VERSION {
        return Err(Error::Parse(format!("unsupported checkpoint version {}", file.version)));
    }
    let params = file
        .params
        .into_iter()
        .map(|p| Parameter::new(p.name, Matrix::from_vec(p.rows, p.cols, p.data)))
        .collect();
    Ok(FusionModel { config: file.config, params })
}

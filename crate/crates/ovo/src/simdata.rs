//! Synthetic multimodal dataset: two classes distinguishable only from all
//! modalities jointly. Class 0 draws k uniform values and normalizes them to
//! sum to 1.0; class 1 draws k uniform values below a threshold. Each base
//! value is expanded into a vector by uniform noise around it.

use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::numerics::Rng;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimConfig {
    pub k: usize,
    pub vec_len: usize,
    pub samples: usize,
    pub threshold: f64,
    pub noise_halfwidth: f64,
    pub seed: u64,
}

impl Default for SimConfig {
    fn default() -> Self {
        SimConfig { k: 20, vec_len: 20, samples: 2000, threshold: 0.15, noise_halfwidth: 0.01, seed: 0 }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.k == 0 || self.vec_len == 0 || self.samples == 0 {
            return Err(Error::InvalidConfig("k, vec_len and samples must be positive".into()));
        }
        if self.samples % 2 != 0 {
            return Err(Error::InvalidConfig(format!(
                "samples must be even for balanced classes, got {}",
                self.samples
            )));
        }
        if !(self.threshold > 0.0 && self.threshold < 1.0) {
            return Err(Error::InvalidConfig(format!(
                "threshold must lie in (0, 1), got {}",
                self.threshold
            )));
        }
        if self.noise_halfwidth < 0.0 {
            return Err(Error::InvalidConfig(format!(
                "noise_halfwidth must be nonnegative, got {}",
                self.noise_halfwidth
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimSample {
    pub label: usize,
    /// Per-modality scalar the vector was expanded from. Empty for samples
    /// read back from CSV (the file stores only label and vectors).
    pub base_values: Vec<f64>,
    pub modality_vectors: Vec<Vec<f64>>,
}

#[derive(Debug, Clone)]
pub struct SimDataset {
    pub config: SimConfig,
    pub samples: Vec<SimSample>,
}

/// Deterministic generation: samples/2 of class 0 followed by samples/2 of
/// class 1, from a single seeded stream.
pub fn generate(config: &SimConfig) -> Result<SimDataset> {
    config.validate()?;
    let mut rng = Rng::seeded(config.seed);
    let per_class = config.samples / 2;
    let mut samples = Vec::with_capacity(config.samples);
    for label in [0usize, 1usize] {
        for _ in 0..per_class {
            let mut base: Vec<f64> = if label == 0 {
                let raw: Vec<f64> = (0..config.k).map(|_| rng.uniform(0.0, 1.0)).collect();
                let total: f64 = raw.iter().sum();
                raw.iter().map(|v| v / total).collect()
            } else {
                (0..config.k).map(|_| rng.uniform(0.0, config.threshold)).collect()
            };
            let vectors: Vec<Vec<f64>> = base
                .iter()
                .map(|&v| {
                    (0..config.vec_len)
                        .map(|_| {
                            if config.noise_halfwidth == 0.0 {
                                v
                            } else {
                                rng.uniform(v - config.noise_halfwidth, v + config.noise_halfwidth)
                            }
                        })
                        .collect()
                })
                .collect();
            base.shrink_to_fit();
            samples.push(SimSample { label, base_values: base, modality_vectors: vectors });
        }
    }
    Ok(SimDataset { config: *config, samples })
}

/// Stratified split: each class is shuffled with the given seed and divided
/// by the ratios, so class balance is preserved within one sample per split.
pub fn split(
    samples: &[SimSample],
    ratios: (u32, u32, u32),
    seed: u64,
) -> Result<(Vec<SimSample>, Vec<SimSample>, Vec<SimSample>)> {
    let (r_train, r_val, r_test) = ratios;
    if r_train + r_val + r_test != 100 {
        return Err(Error::InvalidConfig(format!(
            "split ratios must sum to 100, got {r_train}/{r_val}/{r_test}"
        )));
    }
    let mut rng = Rng::seeded(seed);
    let mut train = Vec::new();
    let mut val = Vec::new();
    let mut test = Vec::new();
    for label in [0usize, 1usize] {
        let mut idx: Vec<usize> =
            (0..samples.len()).filter(|&i| samples[i].label == label).collect();
        rng.shuffle(&mut idx);
        let c = idx.len();
        let n_train = c * r_train as usize / 100;
        let n_val = c * r_val as usize / 100;
        for (pos, &i) in idx.iter().enumerate() {
            let sample = samples[i].clone();
            if pos < n_train {
                train.push(sample);
            } else if pos < n_train + n_val {
                val.push(sample);
            } else {
                test.push(sample);
            }
        }
    }
    Ok((train, val, test))
}

/// CSV with header `label,m{j}_f{t}`; floats printed with 17 significant
/// digits so values round-trip exactly.
pub fn to_csv(dataset: &SimDataset) -> String {
    let mut out = String::from("label");
    for j in 0..dataset.config.k {
        for t in 0..dataset.config.vec_len {
            write!(out, ",m{j}_f{t}").unwrap();
        }
    }
    out.push('\n');
    for s in &dataset.samples {
        write!(out, "{}", s.label).unwrap();
        for v in &s.modality_vectors {
            for x in v {
                write!(out, ",{x:.16e}").unwrap();
            }
        }
        out.push('\n');
    }
    out
}

pub fn write_csv(dataset: &SimDataset, path: &Path) -> Result<()> {
    crate::cli::write_atomic(path, to_csv(dataset).as_bytes())
}

/// Sidecar JSON holding the full generation config, next to the CSV.
pub fn write_sidecar(config: &SimConfig, path: &Path) -> Result<()> {
    let bytes = serde_json::to_vec_pretty(config)
        .map_err(|e| Error::Parse(format!("config serialization failed: {e}")))?;
    crate::cli::write_atomic(path, &bytes)
}

/// Parse a dataset CSV. Modality structure (k, vec_len) is recovered from
/// the header. Base values are not stored in the file.
pub fn read_csv(text: &str) -> Result<(usize, usize, Vec<SimSample>)> {
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty dataset file".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    if cols.first() != Some(&"label") {
        return Err(Error::Parse("dataset header must start with 'label'".into()));
    }
    let mut k = 0usize;
    let mut vec_len = 0usize;
    for name in &cols[1..] {
        let rest = name
            .strip_prefix('m')
            .ok_or_else(|| Error::Parse(format!("bad column name '{name}'")))?;
        let (j, t) = rest
            .split_once("_f")
            .ok_or_else(|| Error::Parse(format!("bad column name '{name}'")))?;
        let j: usize = j.parse().map_err(|_| Error::Parse(format!("bad column name '{name}'")))?;
        let t: usize = t.parse().map_err(|_| Error::Parse(format!("bad column name '{name}'")))?;
        k = k.max(j + 1);
        vec_len = vec_len.max(t + 1);
    }
    if cols.len() != 1 + k * vec_len {
        return Err(Error::Parse(format!(
            "header declares {} feature columns, expected {}",
            cols.len() - 1,
            k * vec_len
        )));
    }
    let mut samples = Vec::new();
    for (row, line) in lines.enumerate() {
        if line.is_empty() {
            continue;
        }
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse(format!(
                "row {}: expected {} fields, got {}",
                row + 1,
                cols.len(),
                fields.len()
            )));
        }
        let label: usize = fields[0]
            .parse()
            .map_err(|_| Error::Parse(format!("row {}: bad label '{}'", row + 1, fields[0])))?;
        if label > 1 {
            return Err(Error::Parse(format!("row {}: label must be 0 or 1", row + 1)));
        }
        let mut vectors = vec![Vec::with_capacity(vec_len); k];
        for (c, field) in fields[1..].iter().enumerate() {
            let v: f64 = field
                .parse()
                .map_err(|_| Error::Parse(format!("row {}: bad float '{field}'", row + 1)))?;
            vectors[c / vec_len].push(v);
        }
        samples.push(SimSample { label, base_values: Vec::new(), modality_vectors: vectors });
    }
    Ok((k, vec_len, samples))
}

pub fn read_csv_file(path: &Path) -> Result<(usize, usize, Vec<SimSample>)> {
    let text = std::fs::read_to_string(path)?;
    read_csv(&text)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn class_rules_hold_for_every_sample() {
        let cfg = SimConfig::default();
        let data = generate(&cfg).unwrap();
        assert_eq!(data.samples.len(), 2000);
        let mut counts = [0usize; 2];
        for s in &data.samples {
            counts[s.label] += 1;
            assert_eq!(s.base_values.len(), 20);
            assert_eq!(s.modality_vectors.len(), 20);
            if s.label == 0 {
                let sum: f64 = s.base_values.iter().sum();
                assert!((sum - 1.0).abs() < 1e-9, "class-0 sum {sum}");
            } else {
                assert!(s.base_values.iter().all(|&v| v < cfg.threshold));
            }
            for (j, v) in s.modality_vectors.iter().enumerate() {
                assert_eq!(v.len(), 20);
                for &x in v {
                    assert!((x - s.base_values[j]).abs() <= cfg.noise_halfwidth + 1e-15);
                }
            }
        }
        assert_eq!(counts, [1000, 1000]);
    }

    #[test]
    fn zero_noise_gives_constant_vectors() {
        let cfg = SimConfig { noise_halfwidth: 0.0, samples: 10, k: 3, vec_len: 4, ..Default::default() };
        let data = generate(&cfg).unwrap();
        for s in &data.samples {
            for (j, v) in s.modality_vectors.iter().enumerate() {
                assert!(v.iter().all(|&x| x == s.base_values[j]));
            }
        }
    }

    #[test]
    fn same_seed_byte_identical_csv() {
        let cfg = SimConfig { samples: 40, k: 4, vec_len: 5, seed: 123, ..Default::default() };
        let a = to_csv(&generate(&cfg).unwrap());
        let b = to_csv(&generate(&cfg).unwrap());
        assert_eq!(a, b);
        let cfg2 = SimConfig { seed: 124, ..cfg };
        assert_ne!(a, to_csv(&generate(&cfg2).unwrap()));
    }

    #[test]
    fn csv_roundtrip_exact() {
        let cfg = SimConfig { samples: 20, k: 3, vec_len: 4, seed: 7, ..Default::default() };
        let data = generate(&cfg).unwrap();
        let text = to_csv(&data);
        let (k, vec_len, samples) = read_csv(&text).unwrap();
        assert_eq!((k, vec_len), (3, 4));
        assert_eq!(samples.len(), 20);
        for (a, b) in samples.iter().zip(&data.samples) {
            assert_eq!(a.label, b.label);
            assert_eq!(a.modality_vectors, b.modality_vectors);
        }
    }

    #[test]
    fn csv_header_schema() {
        let cfg = SimConfig { samples: 2, k: 2, vec_len: 3, ..Default::default() };
        let text = to_csv(&generate(&cfg).unwrap());
        let header = text.lines().next().unwrap();
        assert_eq!(header, "label,m0_f0,m0_f1,m0_f2,m1_f0,m1_f1,m1_f2");
    }

    #[test]
    fn default_split_counts_and_balance() {
        let data = generate(&SimConfig::default()).unwrap();
        let (train, val, test) = split(&data.samples, (80, 10, 10), 42).unwrap();
        assert_eq!((train.len(), val.len(), test.len()), (1600, 200, 200));
        for part in [&train, &val, &test] {
            let ones = part.iter().filter(|s| s.label == 1).count();
            assert!((ones as i64 - (part.len() / 2) as i64).abs() <= 1);
        }
        // Partition: disjoint and exhaustive (compare as sorted multisets of
        // the first feature, which is unique with probability 1).
        let mut all: Vec<f64> = train
            .iter()
            .chain(&val)
            .chain(&test)
            .map(|s| s.modality_vectors[0][0])
            .collect();
        let mut orig: Vec<f64> = data.samples.iter().map(|s| s.modality_vectors[0][0]).collect();
        all.sort_by(|a, b| a.partial_cmp(b).unwrap());
        orig.sort_by(|a, b| a.partial_cmp(b).unwrap());
        assert_eq!(all, orig);
    }

    #[test]
    fn bad_ratios_rejected() {
        let data = generate(&SimConfig { samples: 10, k: 2, vec_len: 2, ..Default::default() }).unwrap();
        assert!(split(&data.samples, (80, 10, 5), 0).is_err());
    }

    #[test]
    fn invalid_configs_rejected() {
        assert!(generate(&SimConfig { samples: 3, ..Default::default() }).is_err());
        assert!(generate(&SimConfig { threshold: 1.5, ..Default::default() }).is_err());
        assert!(generate(&SimConfig { noise_halfwidth: -0.1, ..Default::default() }).is_err());
    }

    #[test]
    fn no_single_modality_threshold_separates_classes() {
        // Brute-force depth-1 threshold classifiers on each single base
        // value: none should reach 0.75 accuracy on default k=20 data.
        let data = generate(&SimConfig { seed: 5, ..Default::default() }).unwrap();
        for j in 0..20 {
            let mut pairs: Vec<(f64, usize)> =
                data.samples.iter().map(|s| (s.base_values[j], s.label)).collect();
            pairs.sort_by(|a, b| a.0.partial_cmp(&b.0).unwrap());
            let total = pairs.len() as f64;
            let ones: usize = pairs.iter().filter(|p| p.1 == 1).count();
            // Sweep all cut points; consider both orientations.
            let mut best = 0.0_f64;
            let mut ones_below = 0usize;
            for (i, p) in pairs.iter().enumerate() {
                if p.1 == 1 {
                    ones_below += 1;
                }
                let below = i + 1;
                // predict 1 below the cut, 0 above
                let correct1 = ones_below + ((pairs.len() - below) - (ones - ones_below));
                let acc1 = correct1 as f64 / total;
                // predict 0 below, 1 above
                let correct0 = (below - ones_below) + (ones - ones_below);
                let acc0 = correct0 as f64 / total;
                best = best.max(acc1).max(acc0);
            }
            assert!(best < 0.75, "modality {j}: single-threshold accuracy {best}");
        }
    }
}

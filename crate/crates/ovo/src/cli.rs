//! Command-line surface: dataset generation, training, FLOP benchmarking,
//! complexity queries, gradient checks, and report emission.
//!
//! Exit codes are a stable contract: 0 success, 2 invalid configuration,
//! 3 I/O failure, 4 numeric abort, 5 check failure. Output files are written
//! atomically (temp file + rename). Wall-clock timings live in their own
//! `timing.json` so every other artifact is bit-identical across reruns.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::flops::{self, FlopCounter};
use crate::fusion::{self, FusionConfig, FusionModel, Scheme};
use crate::numerics::Rng;
use crate::simdata::{self, SimConfig};
use crate::train::{self, TrainConfig};
use crate::{Error, Result};

/// Write via a temp file in the same directory, then rename.
pub fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    if let Some(parent) = path.parent() {
        if !parent.as_os_str().is_empty() {
            fs::create_dir_all(parent)?;
        }
    }
    let mut tmp = path.as_os_str().to_owned();
    tmp.push(".tmp");
    let tmp = PathBuf::from(tmp);
    fs::write(&tmp, bytes)?;
    fs::rename(&tmp, path)?;
    Ok(())
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)
        .map_err(|e| Error::Parse(format!("serialization failed: {e}")))?;
    bytes.push(b'\n');
    write_atomic(path, &bytes)
}

pub fn exit_code(err: &Error) -> i32 {
    match err {
        Error::InvalidConfig(_) | Error::Parse(_) => 2,
        Error::Io(_) => 3,
        Error::NonFinite(_) => 4,
        Error::CheckFailed(_) => 5,
    }
}

#[derive(Parser, Debug)]
#[command(
    name = "ovo",
    version,
    about = "One-versus-others multimodal attention: data, training and FLOP benchmarks"
)]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Subcommand, Debug)]
pub enum Command {
    /// Generate the synthetic multimodal dataset (CSV + sidecar config).
    GenData(GenDataArgs),
    /// Train fusion models over seeds; emit per-run artifacts and aggregates.
    Train(TrainArgs),
    /// Benchmark integration-stage FLOPs and wall time across schemes and k.
    Bench(BenchArgs),
    /// Print the closed-form FLOP breakdown for one configuration.
    Complexity(ComplexityArgs),
    /// Compare autograd gradients against finite differences.
    GradCheck(GradCheckArgs),
    /// Turn a bench CSV into a plot-ready CSV and a Markdown summary.
    Report(ReportArgs),
}

#[derive(Args, Debug)]
pub struct GenDataArgs {
    /// Modality count
    #[arg(long, default_value_t = 20)]
    pub k: usize,
    /// Per-modality vector length
    #[arg(long, default_value_t = 20)]
    pub vec_len: usize,
    /// Total samples (balanced across the two classes)
    #[arg(long, default_value_t = 2000)]
    pub samples: usize,
    /// Class-1 upper bound for each base value
    #[arg(long, default_value_t = 0.15)]
    pub threshold: f64,
    /// Uniform noise half-width around each base value
    #[arg(long, default_value_t = 0.01)]
    pub noise: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output CSV path (sidecar config goes next to it)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct BenchArgs {
    /// Comma-separated schemes
    #[arg(long, default_value = "ovo,cross-pairwise,early-self")]
    pub schemes: String,
    /// Comma-separated modality counts
    #[arg(long = "k-list", default_value = "2,5,10,15,20")]
    pub k_list: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub h: usize,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Output directory (bench.csv + summary.json)
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ComplexityArgs {
    #[arg(long)]
    pub scheme: String,
    #[arg(long, default_value_t = 20)]
    pub k: u64,
    #[arg(long, default_value_t = 4)]
    pub n: u64,
    #[arg(long, default_value_t = 16)]
    pub d: u64,
    #[arg(long, default_value_t = 2)]
    pub h: u64,
}

#[derive(Args, Debug)]
pub struct GradCheckArgs {
    #[arg(long, default_value = "ovo")]
    pub scheme: String,
    #[arg(long, default_value_t = 3)]
    pub k: usize,
    #[arg(long, default_value_t = 2)]
    pub n: usize,
    #[arg(long, default_value_t = 8)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub h: usize,
    /// Raw features per modality fed to the encoders
    #[arg(long, default_value_t = 8)]
    pub raw_dim: usize,
    /// Central-difference step
    #[arg(long, default_value_t = 1e-5)]
    pub eps: f64,
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
}

#[derive(Args, Debug)]
pub struct TrainArgs {
    /// Comma-separated schemes to train (a t-test table is emitted for 2+)
    #[arg(long, default_value = "ovo")]
    pub schemes: String,
    /// Dataset CSV produced by gen-data
    #[arg(long)]
    pub data: PathBuf,
    /// Optional JSON file with TrainConfig fields; flags win on conflict
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Sweep the default lr x batch x heads grid before the seeded runs
    #[arg(long, default_value_t = false)]
    pub grid: bool,
    /// Comma-separated seeds
    #[arg(long, default_value = "0,1,2,3,4,5,6,7,8,9")]
    pub seeds: String,
    #[arg(long, default_value_t = 4)]
    pub n: usize,
    #[arg(long, default_value_t = 16)]
    pub d: usize,
    #[arg(long, default_value_t = 2)]
    pub h: usize,
    #[arg(long, default_value_t = 2)]
    pub classes: usize,
    #[arg(long)]
    pub lr: Option<f64>,
    #[arg(long)]
    pub batch: Option<usize>,
    #[arg(long)]
    pub max_epochs: Option<usize>,
    #[arg(long)]
    pub patience: Option<usize>,
    /// Seed for the stratified 80/10/10 split
    #[arg(long, default_value_t = 42)]
    pub split_seed: u64,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
}

#[derive(Args, Debug)]
pub struct ReportArgs {
    /// bench.csv produced by the bench subcommand
    #[arg(long = "bench-csv")]
    pub bench_csv: PathBuf,
    /// Optional `label=aggregate.json` entries to include a mean±std table
    #[arg(long = "aggregate")]
    pub aggregates: Vec<String>,
    /// Output directory (report.csv + report.md)
    #[arg(long)]
    pub out: PathBuf,
}

pub fn run(cli: &Cli) -> Result<()> {
    match &cli.command {
        Command::GenData(args) => gen_data(args),
        Command::Bench(args) => bench(args),
        Command::Complexity(args) => complexity(args),
        Command::GradCheck(args) => grad_check_cmd(args),
        Command::Train(args) => train_cmd(args),
        Command::Report(args) => report(args),
    }
}

fn parse_schemes(s: &str) -> Result<Vec<Scheme>> {
    let schemes: Result<Vec<Scheme>> = s.split(',').map(|p| p.trim().parse()).collect();
    let schemes = schemes?;
    if schemes.is_empty() {
        return Err(Error::InvalidConfig("at least one scheme is required".into()));
    }
    Ok(schemes)
}

fn parse_usize_list(s: &str, what: &str) -> Result<Vec<usize>> {
    let values: std::result::Result<Vec<usize>, _> =
        s.split(',').map(|p| p.trim().parse()).collect();
    let values = values.map_err(|_| Error::InvalidConfig(format!("invalid {what} list '{s}'")))?;
    if values.is_empty() {
        return Err(Error::InvalidConfig(format!("{what} list must be nonempty")));
    }
    Ok(values)
}

fn parse_u64_list(s: &str, what: &str) -> Result<Vec<u64>> {
    let values: std::result::Result<Vec<u64>, _> =
        s.split(',').map(|p| p.trim().parse()).collect();
    values.map_err(|_| Error::InvalidConfig(format!("invalid {what} list '{s}'")))
}

fn gen_data(args: &GenDataArgs) -> Result<()> {
    let config = SimConfig {
        k: args.k,
        vec_len: args.vec_len,
        samples: args.samples,
        threshold: args.threshold,
        noise_halfwidth: args.noise,
        seed: args.seed,
    };
    let dataset = simdata::generate(&config)?;
    simdata::write_csv(&dataset, &args.out)?;
    let sidecar = args.out.with_extension("config.json");
    simdata::write_sidecar(&config, &sidecar)?;
    println!(
        "wrote {} samples ({} per class) to {} (config: {})",
        dataset.samples.len(),
        dataset.samples.len() / 2,
        args.out.display(),
        sidecar.display()
    );
    Ok(())
}

#[derive(Serialize)]
struct BenchSummary {
    schemes: Vec<String>,
    k_list: Vec<usize>,
    n: usize,
    d: usize,
    h: usize,
    seed: u64,
    /// Fitted log-log slope of delta-FLOPs vs k per scheme (absent when the
    /// delta is zero everywhere, e.g. the concat baseline).
    slopes: BTreeMap<String, Option<f64>>,
}

fn bench(args: &BenchArgs) -> Result<()> {
    let schemes = parse_schemes(&args.schemes)?;
    let ks = parse_usize_list(&args.k_list, "k")?;
    let mut csv = String::from("scheme,k,n,d,h,flops_analytic,flops_measured,delta_flops,wall_ns\n");
    let mut slopes = BTreeMap::new();
    for &scheme in &schemes {
        let mut points = Vec::new();
        for &k in &ks {
            let cfg = FusionConfig {
                scheme,
                k,
                raw_dim: 1,
                n: args.n,
                d: args.d,
                h: args.h,
                classes: 2,
            };
            cfg.validate()?;
            let model = FusionModel::new(cfg, args.seed)?;
            let mut rng = Rng::seeded(args.seed ^ (k as u64).wrapping_mul(0x9e3779b97f4a7c15));
            let embeddings: Vec<_> =
                (0..k).map(|_| rng.matrix(args.n, args.d, -1.0, 1.0)).collect();
            let counter = FlopCounter::new();
            model.fuse(&embeddings, Some(&counter));
            let measured = counter.total();
            let analytic =
                flops::analytic_flops(scheme, k as u64, args.n as u64, args.d as u64, args.h as u64);
            let delta =
                flops::delta_flops(scheme, k as u64, args.n as u64, args.d as u64, args.h as u64);
            let mut wall_ns = u64::MAX;
            for _ in 0..3 {
                let t0 = Instant::now();
                model.fuse(&embeddings, None);
                wall_ns = wall_ns.min(t0.elapsed().as_nanos() as u64);
            }
            writeln!(
                csv,
                "{scheme},{k},{},{},{},{analytic},{measured},{delta},{wall_ns}",
                args.n, args.d, args.h
            )
            .unwrap();
            if delta > 0 {
                points.push((k as f64, delta as f64));
            }
        }
        let slope = if points.len() >= 2 { Some(flops::log_log_slope(&points)) } else { None };
        slopes.insert(scheme.to_string(), slope);
    }
    fs::create_dir_all(&args.out)?;
    write_atomic(&args.out.join("bench.csv"), csv.as_bytes())?;
    let summary = BenchSummary {
        schemes: schemes.iter().map(|s| s.to_string()).collect(),
        k_list: ks,
        n: args.n,
        d: args.d,
        h: args.h,
        seed: args.seed,
        slopes,
    };
    write_json(&args.out.join("summary.json"), &summary)?;
    println!("wrote {} and {}", args.out.join("bench.csv").display(), args.out.join("summary.json").display());
    Ok(())
}

fn complexity(args: &ComplexityArgs) -> Result<()> {
    let scheme: Scheme = args.scheme.parse()?;
    if args.k == 0 || args.n == 0 || args.d == 0 || args.h == 0 {
        return Err(Error::InvalidConfig("k, n, d, h must be positive".into()));
    }
    if args.d % args.h != 0 {
        return Err(Error::InvalidConfig(format!(
            "model dim {} not divisible by head count {}",
            args.d, args.h
        )));
    }
    if scheme != Scheme::Concat && args.k < 2 {
        return Err(Error::InvalidConfig(format!("scheme {scheme} requires k >= 2")));
    }
    let (k, n, d, h) = (args.k, args.n, args.d, args.h);
    println!("scheme={scheme} k={k} n={n} d={d} h={h}");
    println!("phase breakdown:");
    for (phase, count) in flops::analytic_breakdown(scheme, k, n, d, h) {
        println!("  {:<32} {count}", phase.label());
    }
    println!("total FLOPs: {}", flops::analytic_flops(scheme, k, n, d, h));
    println!("delta vs concat baseline: {}", flops::delta_flops(scheme, k, n, d, h));
    let (a, b, c) = flops::leading_term(scheme);
    println!("leading term: k^{a} * n^{b} * d^{c}");
    if scheme == Scheme::CrossPairwise {
        println!("pairwise permutations: k(k-1) = {}", k * (k - 1));
    }
    Ok(())
}

fn grad_check_cmd(args: &GradCheckArgs) -> Result<()> {
    let scheme: Scheme = args.scheme.parse()?;
    let cfg = FusionConfig {
        scheme,
        k: args.k,
        raw_dim: args.raw_dim,
        n: args.n,
        d: args.d,
        h: args.h,
        classes: 2,
    };
    let mut model = FusionModel::new(cfg, args.seed)?;
    let mut rng = Rng::seeded(args.seed.wrapping_add(1));
    let samples: Vec<(Vec<Vec<f64>>, usize)> = (0..2)
        .map(|s| {
            let modalities: Vec<Vec<f64>> = (0..args.k)
                .map(|_| (0..args.raw_dim).map(|_| rng.uniform(-1.0, 1.0)).collect())
                .collect();
            (modalities, s % 2)
        })
        .collect();
    let batch: Vec<(&[Vec<f64>], usize)> =
        samples.iter().map(|(m, l)| (m.as_slice(), *l)).collect();
    let report = fusion::grad_check(&mut model, &batch, args.eps)?;
    println!(
        "scheme={scheme} k={} n={} d={} h={} eps={}",
        args.k, args.n, args.d, args.h, args.eps
    );
    println!("max relative error: {:e} (worst parameter: {})", report.max_error, report.worst_param);
    if report.max_error >= 1e-4 {
        return Err(Error::CheckFailed(format!(
            "gradient check failed: max relative error {:e} at parameter '{}'",
            report.max_error, report.worst_param
        )));
    }
    println!("gradient check passed");
    Ok(())
}

#[derive(Serialize)]
struct ResolvedTrainRun {
    scheme: String,
    model: FusionConfig,
    train: TrainConfig,
    grid_winner: Option<train::GridPoint>,
}

#[derive(Serialize)]
struct RunArtifact<'a> {
    best_epoch: usize,
    best_val_accuracy: f64,
    test_accuracy: f64,
    test_f1: f64,
    train_flops: u64,
    epochs_run: usize,
    epochs: &'a [train::EpochRecord],
}

#[derive(Serialize)]
struct TrainTopLevelConfig {
    schemes: Vec<String>,
    data: String,
    seeds: Vec<u64>,
    split_seed: u64,
    grid: bool,
    n: usize,
    d: usize,
    h: usize,
    classes: usize,
    base_train_config: TrainConfig,
}

fn load_train_config(path: &Path) -> Result<TrainConfig> {
    let bytes = fs::read(path)?;
    serde_json::from_slice(&bytes)
        .map_err(|e| Error::Parse(format!("invalid train config {}: {e}", path.display())))
}

fn train_cmd(args: &TrainArgs) -> Result<()> {
    let schemes = parse_schemes(&args.schemes)?;
    let seeds = parse_u64_list(&args.seeds, "seed")?;
    if seeds.is_empty() {
        return Err(Error::InvalidConfig("at least one seed is required".into()));
    }
    let mut base = match &args.config {
        Some(path) => load_train_config(path)?,
        None => TrainConfig::default(),
    };
    if let Some(lr) = args.lr {
        base.learning_rate = lr;
    }
    if let Some(b) = args.batch {
        base.batch_size = b;
    }
    if let Some(m) = args.max_epochs {
        base.max_epochs = m;
    }
    if let Some(p) = args.patience {
        base.patience = p;
    }
    base.validate()?;

    let (k, vec_len, samples) = simdata::read_csv_file(&args.data)?;
    let (train_set, val_set, test_set) = simdata::split(&samples, (80, 10, 10), args.split_seed)?;

    fs::create_dir_all(&args.out)?;
    write_json(
        &args.out.join("config.json"),
        &TrainTopLevelConfig {
            schemes: schemes.iter().map(|s| s.to_string()).collect(),
            data: args.data.display().to_string(),
            seeds: seeds.clone(),
            split_seed: args.split_seed,
            grid: args.grid,
            n: args.n,
            d: args.d,
            h: args.h,
            classes: args.classes,
            base_train_config: base,
        },
    )?;

    let mut per_scheme_accuracies: Vec<(Scheme, Vec<f64>)> = Vec::new();
    for &scheme in &schemes {
        let mut model_cfg = FusionConfig {
            scheme,
            k,
            raw_dim: vec_len,
            n: args.n,
            d: args.d,
            h: args.h,
            classes: args.classes,
        };
        model_cfg.validate()?;
        let mut resolved = base;
        let mut grid_winner = None;
        if args.grid {
            let sweep_cfg = TrainConfig { seed: seeds[0], ..base };
            let (winner, _) = train::grid_search(
                model_cfg,
                &train_set,
                &val_set,
                &sweep_cfg,
                &train::default_grid(),
            )?;
            resolved.learning_rate = winner.learning_rate;
            resolved.batch_size = winner.batch_size;
            model_cfg.h = winner.heads;
            grid_winner = Some(winner);
        }

        let scheme_dir = args.out.join(scheme.to_string());
        let mut results = Vec::new();
        for &seed in &seeds {
            let cfg = TrainConfig { seed, ..resolved };
            let seed_dir = scheme_dir.join(format!("seed_{seed}"));
            fs::create_dir_all(&seed_dir)?;
            write_json(
                &seed_dir.join("config.json"),
                &ResolvedTrainRun {
                    scheme: scheme.to_string(),
                    model: model_cfg,
                    train: cfg,
                    grid_winner,
                },
            )?;
            let (model, result) = train::run_seed(model_cfg, &train_set, &val_set, &test_set, &cfg)?;
            let mut metrics = String::from("epoch,train_loss,val_accuracy\n");
            for e in &result.epochs {
                writeln!(metrics, "{},{:.16e},{:.16e}", e.epoch, e.train_loss, e.val_accuracy)
                    .unwrap();
            }
            write_atomic(&seed_dir.join("metrics.csv"), metrics.as_bytes())?;
            write_json(
                &seed_dir.join("result.json"),
                &RunArtifact {
                    best_epoch: result.best_epoch,
                    best_val_accuracy: result.best_val_accuracy,
                    test_accuracy: result.test_accuracy,
                    test_f1: result.test_f1,
                    train_flops: result.train_flops,
                    epochs_run: result.epochs.len(),
                    epochs: &result.epochs,
                },
            )?;
            write_json(
                &seed_dir.join("timing.json"),
                &serde_json::json!({ "wall_ns": result.wall_ns }),
            )?;
            fusion::save_checkpoint(&model, &seed_dir.join("checkpoint.json"))?;
            println!(
                "{scheme} seed {seed}: test accuracy {:.4}, F1 {:.4} ({} epochs)",
                result.test_accuracy,
                result.test_f1,
                result.epochs.len()
            );
            results.push(result);
        }

        let acc: Vec<f64> = results.iter().map(|r| r.test_accuracy).collect();
        let f1: Vec<f64> = results.iter().map(|r| r.test_f1).collect();
        let (mean_acc, std_acc) = train::mean_std(&acc);
        let (mean_f1, std_f1) = train::mean_std(&f1);
        write_json(
            &scheme_dir.join("aggregate.json"),
            &serde_json::json!({
                "scheme": scheme.to_string(),
                "seeds": seeds,
                "grid_winner": grid_winner,
                "mean_test_accuracy": mean_acc,
                "std_test_accuracy": std_acc,
                "mean_test_f1": mean_f1,
                "std_test_f1": std_f1,
                "formatted_accuracy": format!("{mean_acc:.3} \u{b1} {std_acc:.3}"),
                "formatted_f1": format!("{mean_f1:.3} \u{b1} {std_f1:.3}"),
                "per_seed_test_accuracy": acc,
                "per_seed_test_f1": f1,
            }),
        )?;
        println!("{scheme}: test accuracy {mean_acc:.3} \u{b1} {std_acc:.3}");
        per_scheme_accuracies.push((scheme, acc));
    }

    if per_scheme_accuracies.len() >= 2 {
        let mut csv = String::from("scheme_a,scheme_b,t_statistic,p_value,significant_at_0.01\n");
        for i in 0..per_scheme_accuracies.len() {
            for j in (i + 1)..per_scheme_accuracies.len() {
                let (sa, ref va) = per_scheme_accuracies[i];
                let (sb, ref vb) = per_scheme_accuracies[j];
                let (t, p) = train::t_test(va, vb)?;
                writeln!(csv, "{sa},{sb},{t:.16e},{p:.16e},{}", p < 0.01).unwrap();
            }
        }
        write_atomic(&args.out.join("t_tests.csv"), csv.as_bytes())?;
    }
    Ok(())
}

struct BenchRow {
    scheme: String,
    k: u64,
    delta_flops: u64,
}

fn read_bench_csv(path: &Path) -> Result<Vec<BenchRow>> {
    let text = fs::read_to_string(path)?;
    let mut lines = text.lines();
    let header = lines.next().ok_or_else(|| Error::Parse("empty bench CSV".into()))?;
    let cols: Vec<&str> = header.split(',').collect();
    let col = |name: &str| {
        cols.iter()
            .position(|c| *c == name)
            .ok_or_else(|| Error::Parse(format!("bench CSV missing column '{name}'")))
    };
    let (c_scheme, c_k, c_delta) = (col("scheme")?, col("k")?, col("delta_flops")?);
    let mut rows = Vec::new();
    for line in lines.filter(|l| !l.is_empty()) {
        let fields: Vec<&str> = line.split(',').collect();
        if fields.len() != cols.len() {
            return Err(Error::Parse(format!("malformed bench CSV row '{line}'")));
        }
        rows.push(BenchRow {
            scheme: fields[c_scheme].to_string(),
            k: fields[c_k].parse().map_err(|_| Error::Parse(format!("bad k '{}'", fields[c_k])))?,
            delta_flops: fields[c_delta]
                .parse()
                .map_err(|_| Error::Parse(format!("bad delta_flops '{}'", fields[c_delta])))?,
        });
    }
    Ok(rows)
}

fn report(args: &ReportArgs) -> Result<()> {
    let rows = read_bench_csv(&args.bench_csv)?;
    fs::create_dir_all(&args.out)?;

    let mut long = String::from("scheme,k,delta_flops\n");
    for r in &rows {
        writeln!(long, "{},{},{}", r.scheme, r.k, r.delta_flops).unwrap();
    }
    write_atomic(&args.out.join("report.csv"), long.as_bytes())?;

    let mut schemes: Vec<String> = Vec::new();
    for r in &rows {
        if !schemes.contains(&r.scheme) {
            schemes.push(r.scheme.clone());
        }
    }
    let mut md = String::from("# Integration-stage FLOP scaling\n\n");
    md.push_str("Delta FLOPs = integration-stage FLOPs minus the concatenation baseline.\n\n");
    md.push_str("| scheme | fitted log-log slope (delta FLOPs vs k) |\n|---|---|\n");
    for s in &schemes {
        let points: Vec<(f64, f64)> = rows
            .iter()
            .filter(|r| &r.scheme == s && r.delta_flops > 0)
            .map(|r| (r.k as f64, r.delta_flops as f64))
            .collect();
        if points.len() >= 2 {
            writeln!(md, "| {s} | {:.4} |", flops::log_log_slope(&points)).unwrap();
        } else {
            writeln!(md, "| {s} | n/a |").unwrap();
        }
    }
    md.push_str("\n| scheme | k | delta FLOPs |\n|---|---|---|\n");
    for r in &rows {
        writeln!(md, "| {} | {} | {} |", r.scheme, r.k, r.delta_flops).unwrap();
    }

    if !args.aggregates.is_empty() {
        md.push_str("\n## Test metrics (mean \u{b1} std over seeds)\n\n");
        md.push_str("| run | accuracy | F1 |\n|---|---|---|\n");
        for entry in &args.aggregates {
            let (label, path) = entry.split_once('=').ok_or_else(|| {
                Error::InvalidConfig(format!("--aggregate expects label=path, got '{entry}'"))
            })?;
            let bytes = fs::read(path)?;
            let agg: serde_json::Value = serde_json::from_slice(&bytes)
                .map_err(|e| Error::Parse(format!("invalid aggregate {path}: {e}")))?;
            let acc = agg["formatted_accuracy"].as_str().unwrap_or("n/a").to_string();
            let f1 = agg["formatted_f1"].as_str().unwrap_or("n/a").to_string();
            writeln!(md, "| {label} | {acc} | {f1} |").unwrap();
        }
    }
    write_atomic(&args.out.join("report.md"), md.as_bytes())?;
    println!("wrote {} and {}", args.out.join("report.csv").display(), args.out.join("report.md").display());
    Ok(())
}

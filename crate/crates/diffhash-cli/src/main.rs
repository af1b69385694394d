//! `diffhash`: train similarity-sensitive binary hash models, encode
//! descriptors to packed codes, match them under Hamming distance, and
//! evaluate ROC / FNR-at-FPR performance.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use serde::Serialize;

use diffhash::eval::{self, OperatingPoint, RealOperatingPoint};
use diffhash::model::{HashModel, ModelFile, Provenance};
use diffhash::{
    dataset, hashcodec, train_kernel, train_linear, DescriptorSet, ExponentMode, KernelConfig,
    KernelKind, PairLabel, PairSet, SynthConfig, SynthPreset, TrainStats,
};

#[derive(Parser)]
#[command(name = "diffhash", version, about = "Learned binary hashing for descriptor matching")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Train a linear or kernel diff-hash model from labeled pairs.
    Train(TrainArgs),
    /// Encode descriptors into a packed binary hash file.
    Encode(EncodeArgs),
    /// Rank database codes by Hamming distance from each query code.
    Match(MatchArgs),
    /// Evaluate a model on labeled test pairs: ROC, AUC, FNR at FPR.
    Eval(EvalArgs),
    /// Generate synthetic descriptors and labeled pairs.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum ModeArg {
    Linear,
    Kernel,
}

#[derive(Clone, Copy, ValueEnum)]
enum KernelArg {
    Linear,
    GaussianMahalanobis,
}

#[derive(Clone, Copy, ValueEnum)]
enum ExponentArg {
    Half,
    Full,
}

#[derive(Clone, Copy, ValueEnum)]
enum PresetArg {
    GaussianClusters,
    Rings,
}

#[derive(clap::Args)]
struct TrainArgs {
    /// Model family to train.
    #[arg(long, value_enum)]
    mode: ModeArg,
    /// Descriptor file (DHD1 or CSV).
    #[arg(long)]
    desc: PathBuf,
    /// Positive (similar) pair file.
    #[arg(long)]
    pos: PathBuf,
    /// Negative (dissimilar) pair file.
    #[arg(long)]
    neg: PathBuf,
    /// Hash length in bits.
    #[arg(long)]
    m: usize,
    /// FNR/FPR trade-off weight.
    #[arg(long, default_value_t = 25.0)]
    alpha: f64,
    /// Basis size (kernel mode).
    #[arg(long, default_value_t = 256)]
    l: usize,
    /// Kernel family (kernel mode).
    #[arg(long, value_enum, default_value_t = KernelArg::GaussianMahalanobis)]
    kernel: KernelArg,
    /// Gaussian kernel scale.
    #[arg(long, default_value_t = 1.0)]
    gamma: f64,
    /// Covariance exponent in the Gaussian kernel metric.
    #[arg(long, value_enum, default_value_t = ExponentArg::Half)]
    exponent_mode: ExponentArg,
    /// Seed for basis selection.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Subtract the mean of the referenced descriptors before training
    /// (linear mode only; thresholds absorb the shift).
    #[arg(long)]
    center: bool,
    /// Output model file (JSON).
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EncodeArgs {
    /// Model file produced by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Descriptor file (DHD1 or CSV).
    #[arg(long)]
    desc: PathBuf,
    /// Output hash file (DHB1).
    #[arg(long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct MatchArgs {
    /// Database hash file (DHB1).
    #[arg(long)]
    db: PathBuf,
    /// Query hash file (DHB1).
    #[arg(long)]
    query: PathBuf,
    /// Neighbors to report per query.
    #[arg(long)]
    k: usize,
}

#[derive(clap::Args)]
struct EvalArgs {
    /// Model file produced by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Descriptor file the pair indices refer to.
    #[arg(long)]
    desc: PathBuf,
    /// Positive test pair file.
    #[arg(long)]
    pos: PathBuf,
    /// Negative test pair file.
    #[arg(long)]
    neg: PathBuf,
    /// Target FPR operating points.
    #[arg(long, value_delimiter = ',', default_values_t = vec![0.001, 0.0001])]
    fpr: Vec<f64>,
    /// Write the per-radius ROC curve as CSV.
    #[arg(long)]
    roc_out: Option<PathBuf>,
    /// Also evaluate Euclidean distance on the raw descriptors.
    #[arg(long)]
    baseline_euclidean: bool,
}

#[derive(clap::Args)]
struct SynthArgs {
    #[arg(long, value_enum)]
    preset: PresetArg,
    #[arg(long, default_value_t = 2000)]
    points: usize,
    #[arg(long, default_value_t = 8)]
    dim: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 1000)]
    pos_pairs: usize,
    #[arg(long, default_value_t = 2000)]
    neg_pairs: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output descriptor file (DHD1, or CSV when the path ends in .csv).
    #[arg(long)]
    out_desc: PathBuf,
    /// Output positive pair file.
    #[arg(long)]
    out_pos: PathBuf,
    /// Output negative pair file.
    #[arg(long)]
    out_neg: PathBuf,
}

enum CliError {
    /// Bad flags, bad files, inconsistent inputs: exit code 2.
    Usage(String),
    /// Numerical failure (eigensolver non-convergence): exit code 3.
    Numerical(String),
}

impl From<diffhash::Error> for CliError {
    fn from(e: diffhash::Error) -> Self {
        match e {
            diffhash::Error::NoConvergence(_) => CliError::Numerical(e.to_string()),
            _ => CliError::Usage(e.to_string()),
        }
    }
}

fn usage(msg: impl Into<String>) -> CliError {
    CliError::Usage(msg.into())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Train(args) => cmd_train(args),
        Command::Encode(args) => cmd_encode(args),
        Command::Match(args) => cmd_match(args),
        Command::Eval(args) => cmd_eval(args),
        Command::Synth(args) => cmd_synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(CliError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(CliError::Numerical(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(3)
        }
    }
}

fn load_inputs(
    desc: &Path,
    pos: &Path,
    neg: &Path,
) -> Result<(DescriptorSet, PairSet, PairSet), CliError> {
    let data = dataset::load_descriptors(desc)?;
    let pos = dataset::load_pairs(pos, PairLabel::Positive, data.count())?;
    let neg = dataset::load_pairs(neg, PairLabel::Negative, data.count())?;
    Ok((data, pos, neg))
}

fn provenance(inputs: &[(&str, &Path)]) -> Result<Provenance, CliError> {
    use sha2::{Digest, Sha256};
    let mut digests = BTreeMap::new();
    for (role, path) in inputs {
        let bytes = std::fs::read(path)
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
        digests.insert(format!("{role}:sha256"), hex::encode(Sha256::digest(&bytes)));
    }
    // Only stamp a creation time when the caller opts in; otherwise model
    // files stay byte-reproducible run to run.
    let created_at = std::env::var("SOURCE_DATE_EPOCH").ok();
    Ok(Provenance {
        created_at,
        input_digests: digests,
    })
}

#[derive(Serialize)]
struct TrainSummary<'a> {
    mode: &'static str,
    m: usize,
    n: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    l: Option<usize>,
    alpha: f64,
    seed: u64,
    eigenvalues: &'a [f64],
    per_bit: &'a [diffhash::BitStats],
    model: &'a Path,
}

fn cmd_train(args: TrainArgs) -> Result<(), CliError> {
    if !args.alpha.is_finite() || args.alpha < 0.0 {
        return Err(usage("--alpha must be finite and nonnegative"));
    }
    let (data, pos, neg) = load_inputs(&args.desc, &args.pos, &args.neg)?;
    let n = data.dim();

    let (model, stats): (HashModel, TrainStats) = match args.mode {
        ModeArg::Linear => {
            if args.m == 0 || args.m > n {
                return Err(usage(format!(
                    "--m: linear hash length must satisfy 1 <= m <= n, got m={} with n={n}",
                    args.m
                )));
            }
            let (model, stats) =
                train_linear::train_diff_hash(&pos, &neg, &data, args.m, args.alpha, args.center)?;
            (HashModel::Linear(model), stats)
        }
        ModeArg::Kernel => {
            if args.center {
                return Err(usage("--center only applies to --mode linear"));
            }
            if args.m == 0 || args.m > args.l {
                return Err(usage(format!(
                    "--m: kernel hash length must satisfy 1 <= m <= l, got m={} with --l {}",
                    args.m, args.l
                )));
            }
            let config = KernelConfig {
                kind: match args.kernel {
                    KernelArg::Linear => KernelKind::Linear,
                    KernelArg::GaussianMahalanobis => KernelKind::GaussianMahalanobis,
                },
                gamma: args.gamma,
                exponent_mode: match args.exponent_mode {
                    ExponentArg::Half => ExponentMode::Half,
                    ExponentArg::Full => ExponentMode::Full,
                },
            };
            let (model, stats) = train_kernel::train_kdiff_hash(
                &pos, &neg, &data, args.m, args.l, args.alpha, &config, args.seed,
            )?;
            (HashModel::Kernel(model), stats)
        }
    };

    let prov = provenance(&[
        ("desc", args.desc.as_path()),
        ("pos", args.pos.as_path()),
        ("neg", args.neg.as_path()),
    ])?;
    diffhash::model::save_model(&args.out, &ModelFile::new(model, prov))?;

    let summary = TrainSummary {
        mode: match args.mode {
            ModeArg::Linear => "linear",
            ModeArg::Kernel => "kernel",
        },
        m: args.m,
        n,
        l: (args.mode == ModeArg::Kernel).then_some(args.l),
        alpha: args.alpha,
        seed: args.seed,
        eigenvalues: &stats.eigenvalues,
        per_bit: &stats.bits,
        model: &args.out,
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

fn cmd_encode(args: EncodeArgs) -> Result<(), CliError> {
    let model = diffhash::model::load_model(&args.model)?;
    let data = dataset::load_descriptors(&args.desc)?;
    if data.dim() != model.model.input_dim() {
        return Err(usage(format!(
            "--desc: descriptors are {}-dimensional but the model expects {}",
            data.dim(),
            model.model.input_dim()
        )));
    }
    let codes = hashcodec::encode_set(&model.model, &data)?;
    hashcodec::save_hashes(&args.out, &codes)?;
    Ok(())
}

fn cmd_match(args: MatchArgs) -> Result<(), CliError> {
    let db = hashcodec::load_hashes(&args.db)?;
    let queries = hashcodec::load_hashes(&args.query)?;
    if args.k == 0 || args.k > db.len() {
        return Err(usage(format!(
            "--k must lie in 1..={} (database size), got {}",
            db.len(),
            args.k
        )));
    }
    let mut out = String::new();
    for (qidx, query) in queries.iter().enumerate() {
        let hits = hashcodec::knn(query, &db, args.k)?;
        out.push_str(&format!("{qidx}:"));
        for (idx, dist) in hits {
            out.push_str(&format!(" ({idx},{dist})"));
        }
        out.push('\n');
    }
    print!("{out}");
    Ok(())
}

#[derive(Serialize)]
struct EvalSummary {
    m: usize,
    auc: f64,
    operating_points: Vec<OperatingPoint>,
    #[serde(skip_serializing_if = "Option::is_none")]
    baseline: Option<BaselineSummary>,
}

#[derive(Serialize)]
struct BaselineSummary {
    auc: f64,
    operating_points: Vec<RealOperatingPoint>,
}

fn cmd_eval(args: EvalArgs) -> Result<(), CliError> {
    for &t in &args.fpr {
        if !(t > 0.0 && t < 1.0) {
            return Err(usage(format!("--fpr targets must lie in (0, 1), got {t}")));
        }
    }
    let model = diffhash::model::load_model(&args.model)?;
    let (data, pos, neg) = load_inputs(&args.desc, &args.pos, &args.neg)?;
    if data.dim() != model.model.input_dim() {
        return Err(usage(format!(
            "--desc: descriptors are {}-dimensional but the model expects {}",
            data.dim(),
            model.model.input_dim()
        )));
    }

    let codes = hashcodec::encode_set(&model.model, &data)?;
    let d_pos = hashcodec::pair_distances(&codes, &pos)?;
    let d_neg = hashcodec::pair_distances(&codes, &neg)?;
    let m = model.model.m();
    let curve = eval::roc(&d_pos, &d_neg, m)?;

    let operating_points: Vec<OperatingPoint> = args
        .fpr
        .iter()
        .map(|&t| eval::operating_point(&curve, t))
        .collect();
    for op in &operating_points {
        if op.radius.is_none() {
            eprintln!(
                "warning: no Hamming radius attains FPR <= {}; reporting FNR 1.0",
                op.target_fpr
            );
        }
    }

    if let Some(path) = &args.roc_out {
        std::fs::write(path, eval::roc_csv(&curve))
            .map_err(|e| usage(format!("{}: {e}", path.display())))?;
    }

    let baseline = if args.baseline_euclidean {
        let bcurve = eval::euclidean_baseline(&data, &pos, &neg)?;
        if let Some(path) = &args.roc_out {
            let bpath = baseline_csv_path(path);
            std::fs::write(&bpath, eval::real_roc_csv(&bcurve))
                .map_err(|e| usage(format!("{}: {e}", bpath.display())))?;
        }
        Some(BaselineSummary {
            auc: eval::real_auc(&bcurve),
            operating_points: args
                .fpr
                .iter()
                .map(|&t| eval::real_operating_point(&bcurve, t))
                .collect(),
        })
    } else {
        None
    };

    let summary = EvalSummary {
        m,
        auc: eval::auc(&curve),
        operating_points,
        baseline,
    };
    println!("{}", serde_json::to_string_pretty(&summary).expect("summary serializes"));
    Ok(())
}

/// `roc.csv` -> `roc.euclidean.csv` alongside the hash curve.
fn baseline_csv_path(path: &Path) -> PathBuf {
    match path.extension().and_then(|e| e.to_str()) {
        Some(ext) => path.with_extension(format!("euclidean.{ext}")),
        None => path.with_extension("euclidean"),
    }
}

fn cmd_synth(args: SynthArgs) -> Result<(), CliError> {
    let cfg = SynthConfig {
        preset: match args.preset {
            PresetArg::GaussianClusters => SynthPreset::GaussianClusters,
            PresetArg::Rings => SynthPreset::Rings,
        },
        points: args.points,
        dim: args.dim,
        noise: args.noise,
        pos_pairs: args.pos_pairs,
        neg_pairs: args.neg_pairs,
        seed: args.seed,
    };
    let (data, pos, neg) = dataset::gen_synthetic(&cfg)?;
    dataset::save_descriptors(&args.out_desc, &data)?;
    dataset::save_pairs(&args.out_pos, &pos)?;
    dataset::save_pairs(&args.out_neg, &neg)?;
    eprintln!(
        "wrote {} descriptors (dim {}), {} positive pairs, {} negative pairs",
        data.count(),
        data.dim(),
        pos.len(),
        neg.len()
    );
    Ok(())
}

//! Command line driver: synthetic data generation, training, classification,
//! evaluation, ROC sweeps, operation-count queries and timed benchmarks.

use std::path::{Path, PathBuf};
use std::time::Instant;

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};

use dictlearn::complexity::{complexity_eval, ComplexityQuery, MethodId};
use dictlearn::datagen::{
    gen_multichannel_targets, gen_multilook_stairs, gen_shared_toy, MultichannelConfig,
    MultilookConfig, SharedToyConfig,
};
use dictlearn::dfdl::{dfdl_classify, DfdlConfig, DfdlModel};
use dictlearn::dlsi::{dlsi_classify, dlsi_train, DlsiConfig};
use dictlearn::io::{
    read_dataset, read_model, read_predictions, write_dataset, write_matrix_csv, write_metrics_json,
    write_model, write_predictions, ModelArchive,
};
use dictlearn::lrsdl::{lrsdl_classify, lrsdl_train, LrsdlConfig};
use dictlearn::metrics::{evaluate, roc_m_sweep, roc_theta_sweep, RocPoint};
use dictlearn::tensor_src::{
    generalized_src, tensordl_train, ConfuserThresholds, SparsityMode, TensorCodingConfig,
    TensorDictionary,
};
use dictlearn::{LabeledDataset, Samples, Tensor3};

#[derive(Parser)]
#[command(name = "dictlearn", version, about = "structured sparsity toolkit")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Generate synthetic datasets.
    Synth(SynthArgs),
    /// Train a model on a dataset file.
    Train(TrainArgs),
    /// Classify a dataset with a trained model.
    Classify(ClassifyArgs),
    /// Score predictions against dataset labels.
    Eval(EvalArgs),
    /// Sweep a decision parameter and emit ROC points.
    Roc(RocArgs),
    /// Evaluate an operation-count formula.
    Complexity(ComplexityArgs),
    /// Time train/classify runs and emit a CSV.
    Bench(BenchArgs),
}

#[derive(Args)]
struct SynthArgs {
    /// Shared-feature toy images (four classes of 20x20 patterns).
    #[arg(long = "toy-shared", conflicts_with_all = ["multichannel", "multilook"])]
    toy_shared: bool,
    /// Multi-channel target/confuser/ground scenes.
    #[arg(long, conflicts_with = "multilook")]
    multichannel: bool,
    /// Multi-look stair-structured samples.
    #[arg(long)]
    multilook: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for the generated files.
    #[arg(long, default_value = ".")]
    out_dir: PathBuf,
    #[arg(long, default_value_t = 1000)]
    n_per_class: usize,
    #[arg(long, default_value_t = 200)]
    train_per_class: usize,
    #[arg(long, default_value_t = 0.05)]
    noise_sd: f64,
    #[arg(long, default_value_t = 3)]
    targets: usize,
    #[arg(long, default_value_t = 2)]
    confuser_sets: usize,
    #[arg(long, default_value_t = 2)]
    channels: usize,
    #[arg(long, default_value_t = 1.0)]
    noise_level: f64,
}

#[derive(Args)]
struct TrainArgs {
    /// One of dfdl, fddl, lrsdl, dlsi, tensordl, src.
    #[arg(long)]
    method: String,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    k0: usize,
    #[arg(long, default_value_t = 0.01)]
    lambda1: f64,
    #[arg(long, default_value_t = 0.003)]
    lambda2: f64,
    #[arg(long, default_value_t = 0.01)]
    eta: f64,
    #[arg(long, default_value_t = 0.1)]
    rho: f64,
    #[arg(long, default_value_t = 0.01)]
    gamma: f64,
    #[arg(long, default_value_t = 0.5)]
    w: f64,
    #[arg(long, default_value_t = 20)]
    iters: usize,
    #[arg(long, default_value = "sm")]
    mode: String,
    #[arg(long)]
    nonneg: bool,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value = "sm")]
    mode: String,
    #[arg(long)]
    nonneg: bool,
    #[arg(long, default_value_t = 0.01)]
    lambda: f64,
    /// Ground-energy floor for confuser rejection.
    #[arg(long, default_value_t = 0.0)]
    eps: f64,
    /// Residual ceiling for confuser rejection.
    #[arg(long, default_value_t = f64::INFINITY)]
    tau: f64,
    /// Class id folded from known confusers, if any.
    #[arg(long)]
    confuser_class: Option<usize>,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct RocArgs {
    /// theta or m-connect.
    #[arg(long)]
    kind: String,
    /// theta: CSV rows `fraction,is_positive`; m-connect: JSON grids.
    #[arg(long)]
    input: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 101)]
    steps: usize,
    #[arg(long, default_value_t = 20)]
    m_max: usize,
}

#[derive(Args)]
struct ComplexityArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    c: u128,
    #[arg(long)]
    k: u128,
    #[arg(long = "N", alias = "n")]
    n: u128,
    #[arg(long)]
    d: u128,
    #[arg(long = "L", alias = "l", default_value_t = 1)]
    l: u128,
    #[arg(long, default_value_t = 1)]
    q: u128,
    #[arg(long, default_value_t = 1)]
    q2: u128,
}

#[derive(Args)]
struct BenchArgs {
    #[arg(long)]
    method: String,
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: Option<PathBuf>,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 8)]
    k: usize,
    #[arg(long, default_value_t = 4)]
    k0: usize,
    #[arg(long, default_value_t = 10)]
    iters: usize,
}

fn write_manifest(primary_output: &Path, seed: Option<u64>) -> Result<()> {
    let argv: Vec<String> = std::env::args().collect();
    let manifest = serde_json::json!({
        "tool": "dictlearn",
        "version": env!("CARGO_PKG_VERSION"),
        "argv": argv,
        "seed": seed,
        "threads": std::env::var("DICTLEARN_THREADS").unwrap_or_else(|_| "1".into()),
    });
    let mut path = primary_output.as_os_str().to_owned();
    path.push(".manifest.json");
    std::fs::write(PathBuf::from(path), serde_json::to_string_pretty(&manifest)?)?;
    Ok(())
}

fn tensor_of(ds: &LabeledDataset) -> Tensor3 {
    match &ds.samples {
        Samples::Multi(t) => t.clone(),
        Samples::Single(m) => Tensor3::from_mat(m.clone()),
    }
}

/// Raw sparse-representation dictionary: training samples as atoms, class
/// blocks from labels 1..=C (unit-normalized), grounds (label 0) as the
/// shared block.
fn src_dictionary(train: &LabeledDataset) -> Result<TensorDictionary> {
    let t = tensor_of(train);
    let classes = train.num_classes();
    if classes == 0 {
        bail!("training set has no class labels");
    }
    let mut order = Vec::new();
    let mut sizes = Vec::new();
    for c in 1..=classes {
        let idx = train.indices_of(c);
        if idx.is_empty() {
            bail!("class {c} has no samples");
        }
        sizes.push(idx.len());
        order.extend(idx);
    }
    let grounds = train.indices_of(0);
    let shared = grounds.len();
    order.extend(grounds);

    let mut chans = Vec::new();
    for ch in t.channels() {
        let mut m = dictlearn::Mat::zeros((ch.nrows(), order.len()));
        for (j, &i) in order.iter().enumerate() {
            m.column_mut(j).assign(&ch.column(i));
        }
        chans.push(m);
    }
    let dict = TensorDictionary::new(
        Tensor3::new(chans)?,
        dictlearn::BlockPartition::new(sizes, shared)?,
    )?;
    Ok(dict.normalized())
}

fn run_train(args: &TrainArgs) -> Result<ModelArchive> {
    let train = read_dataset(&args.train)?;
    Ok(match args.method.as_str() {
        "fddl" | "lrsdl" => {
            let cfg = LrsdlConfig {
                atoms_per_class: args.k,
                shared_atoms: if args.method == "fddl" { 0 } else { args.k0 },
                lambda1: args.lambda1,
                lambda2: args.lambda2,
                eta: args.eta,
                w: args.w,
                iters: args.iters,
                ..LrsdlConfig::default()
            };
            ModelArchive::Lrsdl(lrsdl_train(&train, &cfg)?.model)
        }
        "dfdl" => {
            let cfg = DfdlConfig {
                atoms_per_class: args.k,
                rho: args.rho,
                lambda: args.lambda1,
                gamma: args.gamma,
                outer_iters: args.iters,
                ..DfdlConfig::default()
            };
            ModelArchive::Dfdl(DfdlModel::train(&train, &cfg)?.0)
        }
        "dlsi" => {
            let cfg = DlsiConfig {
                atoms_per_class: args.k,
                lambda: args.lambda1,
                eta: args.eta,
                iters: args.iters,
                ..DlsiConfig::default()
            };
            ModelArchive::Dlsi(dlsi_train(&train, &cfg)?.model)
        }
        "tensordl" => {
            let cfg = dictlearn::tensor_src::TensorDlConfig {
                atoms_per_class: args.k,
                lambda1: args.lambda1,
                lambda2: args.lambda2,
                mode: SparsityMode::parse(&args.mode)?,
                nonneg: args.nonneg,
                iters: args.iters,
                ..dictlearn::tensor_src::TensorDlConfig::default()
            };
            // learn class dictionaries on labeled samples; raw grounds
            // (label 0) become the shared block
            let labeled: Vec<usize> = train
                .labels
                .iter()
                .enumerate()
                .filter(|(_, &l)| l != 0)
                .map(|(i, _)| i)
                .collect();
            let t = tensor_of(&train);
            let mut chans = Vec::new();
            for ch in t.channels() {
                let mut m = dictlearn::Mat::zeros((ch.nrows(), labeled.len()));
                for (j, &i) in labeled.iter().enumerate() {
                    m.column_mut(j).assign(&ch.column(i));
                }
                chans.push(m);
            }
            let labels: Vec<usize> = labeled.iter().map(|&i| train.labels[i]).collect();
            let subset = LabeledDataset::new(
                Samples::Multi(Tensor3::new(chans)?),
                labels,
                train.split,
            )?;
            let fit = tensordl_train(&subset, &cfg)?;
            let grounds = train.indices_of(0);
            if grounds.is_empty() {
                ModelArchive::TensorDict(fit.dictionary)
            } else {
                let mut gchans = Vec::new();
                for ch in t.channels() {
                    let mut m = dictlearn::Mat::zeros((ch.nrows(), grounds.len()));
                    for (j, &i) in grounds.iter().enumerate() {
                        m.column_mut(j).assign(&ch.column(i));
                    }
                    gchans.push(dictlearn::mat::normalize_columns(&m));
                }
                let sizes = fit.dictionary.partition.class_sizes().to_vec();
                ModelArchive::TensorDict(TensorDictionary::with_shared(
                    fit.dictionary.dict,
                    Tensor3::new(gchans)?,
                    sizes,
                )?)
            }
        }
        "src" => ModelArchive::TensorDict(src_dictionary(&train)?),
        other => bail!("unknown method '{other}'"),
    })
}

fn run_classify(args: &ClassifyArgs) -> Result<(Vec<usize>, Vec<bool>)> {
    let model = read_model(&args.model)?;
    let data = read_dataset(&args.data)?;
    let n = data.samples.num_samples();
    let mut labels = Vec::with_capacity(n);
    let mut confusers = Vec::with_capacity(n);
    match model {
        ModelArchive::Lrsdl(m) => {
            let y = data.samples.as_single()?;
            for col in y.columns() {
                let r = lrsdl_classify(&col.to_owned(), &m)?;
                labels.push(r.label);
                confusers.push(r.confuser);
            }
        }
        ModelArchive::Dfdl(m) => {
            let y = data.samples.as_single()?;
            for col in y.columns() {
                let r = dfdl_classify(&col.to_owned(), &m)?;
                labels.push(r.label);
                confusers.push(r.confuser);
            }
        }
        ModelArchive::Dlsi(m) => {
            let y = data.samples.as_single()?;
            for col in y.columns() {
                let r = dlsi_classify(&col.to_owned(), &m)?;
                labels.push(r.label);
                confusers.push(r.confuser);
            }
        }
        ModelArchive::TensorDict(dict) => {
            let t = tensor_of(&data);
            let cfg = TensorCodingConfig {
                lambda: args.lambda,
                nonneg: args.nonneg,
                ..TensorCodingConfig::default()
            };
            let th = ConfuserThresholds {
                epsilon: args.eps,
                tau: args.tau,
            };
            let mode = SparsityMode::parse(&args.mode)?;
            for j in 0..t.cols() {
                let y = t.column(j);
                let r = generalized_src(&y, &dict, mode, &cfg, &th, args.confuser_class)?;
                labels.push(r.label);
                confusers.push(r.confuser);
            }
        }
    }
    Ok((labels, confusers))
}

fn write_roc_csv(path: &Path, points: &[RocPoint]) -> Result<()> {
    let mut out = String::from("param,miss,false_alarm\n");
    for p in points {
        out.push_str(&format!("{},{},{}\n", p.param, p.miss, p.false_alarm));
    }
    std::fs::write(path, out)?;
    Ok(())
}

fn run_roc(args: &RocArgs) -> Result<Vec<RocPoint>> {
    match args.kind.as_str() {
        "theta" => {
            let text = std::fs::read_to_string(&args.input)?;
            let mut images = Vec::new();
            for line in text.lines().filter(|l| !l.trim().is_empty()) {
                let fields: Vec<&str> = line.split(',').collect();
                if fields.len() != 2 {
                    bail!("theta input rows must be `fraction,is_positive`");
                }
                images.push((
                    fields[0].trim().parse::<f64>().context("bad fraction")?,
                    fields[1].trim() == "1",
                ));
            }
            if args.steps < 2 {
                bail!("need at least two sweep steps");
            }
            // sweep 0..=1 plus a point just past 1 so the all-diseased
            // endpoint appears
            let mut thetas: Vec<f64> = (0..args.steps)
                .map(|i| i as f64 / (args.steps - 1) as f64)
                .collect();
            thetas.push(1.0 + 1e-9);
            Ok(roc_theta_sweep(&images, &thetas)?)
        }
        "m-connect" => {
            let text = std::fs::read_to_string(&args.input)?;
            let parsed: serde_json::Value = serde_json::from_str(&text)?;
            let list = parsed
                .as_array()
                .context("m-connect input must be a JSON array")?;
            let mut images = Vec::new();
            for item in list {
                let grid_rows = item["grid"]
                    .as_array()
                    .context("grid must be an array of rows")?;
                let rows = grid_rows.len();
                let cols = grid_rows
                    .first()
                    .and_then(|r| r.as_array())
                    .map(|r| r.len())
                    .unwrap_or(0);
                let mut grid = ndarray::Array2::<bool>::from_elem((rows, cols), false);
                for (i, row) in grid_rows.iter().enumerate() {
                    let row = row.as_array().context("grid rows must be arrays")?;
                    if row.len() != cols {
                        bail!("ragged grid");
                    }
                    for (j, v) in row.iter().enumerate() {
                        grid[[i, j]] = v.as_i64().unwrap_or(0) != 0;
                    }
                }
                images.push((grid, item["positive"].as_bool().unwrap_or(false)));
            }
            let ms: Vec<usize> = (1..=args.m_max).collect();
            Ok(roc_m_sweep(&images, &ms)?)
        }
        other => bail!("unknown roc kind '{other}'"),
    }
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    // OpenBLAS reads its thread count at first use
    let threads = std::env::var("DICTLEARN_THREADS").unwrap_or_else(|_| "1".into());
    if std::env::var("OPENBLAS_NUM_THREADS").is_err() {
        std::env::set_var("OPENBLAS_NUM_THREADS", &threads);
    }

    let cli = Cli::parse();
    match &cli.command {
        Command::Synth(args) => {
            std::fs::create_dir_all(&args.out_dir)?;
            if args.toy_shared {
                let cfg = SharedToyConfig {
                    n_per_class: args.n_per_class,
                    train_per_class: args.train_per_class,
                    noise_sd: args.noise_sd,
                    ..SharedToyConfig::default()
                };
                let (train, test, truth) = gen_shared_toy(args.seed, &cfg)?;
                let train_path = args.out_dir.join("toy_train.bin");
                write_dataset(&train_path, &train)?;
                write_dataset(&args.out_dir.join("toy_test.bin"), &test)?;
                write_matrix_csv(
                    &args.out_dir.join("toy_shared_basis.csv"),
                    &truth.shared_elements,
                )?;
                write_manifest(&train_path, Some(args.seed))?;
                println!("wrote toy_train.bin, toy_test.bin, toy_shared_basis.csv");
            } else if args.multichannel {
                let cfg = MultichannelConfig {
                    targets: args.targets,
                    confuser_sets: args.confuser_sets,
                    channels: args.channels,
                    noise_level: args.noise_level,
                    ..MultichannelConfig::default()
                };
                let (train, test) = gen_multichannel_targets(args.seed, &cfg)?;
                let train_path = args.out_dir.join("mc_train.bin");
                write_dataset(&train_path, &train)?;
                write_dataset(&args.out_dir.join("mc_test.bin"), &test)?;
                write_manifest(&train_path, Some(args.seed))?;
                println!("wrote mc_train.bin, mc_test.bin");
            } else if args.multilook {
                let cfg = MultilookConfig {
                    noise_level: args.noise_level,
                    ..MultilookConfig::default()
                };
                let data = gen_multilook_stairs(args.seed, &cfg)?;
                let dict_path = args.out_dir.join("ml_dictionary.bin");
                dictlearn::io::write_matrix(&dict_path, &data.dictionary)?;
                write_manifest(&dict_path, Some(args.seed))?;
                println!("wrote ml_dictionary.bin ({} samples held in memory only)", data.samples.len());
            } else {
                bail!("pick one of --toy-shared, --multichannel, --multilook");
            }
        }
        Command::Train(args) => {
            let model = run_train(args)?;
            write_model(&args.out, &model)?;
            write_manifest(&args.out, Some(args.seed))?;
            println!("wrote {}", args.out.display());
        }
        Command::Classify(args) => {
            let (labels, confusers) = run_classify(args)?;
            write_predictions(&args.out, &labels, &confusers)?;
            write_manifest(&args.out, Some(args.seed))?;
            println!("wrote {}", args.out.display());
        }
        Command::Eval(args) => {
            let (pred, _) = read_predictions(&args.pred)?;
            let data = read_dataset(&args.data)?;
            let report = evaluate(&pred, &data.labels)?;
            write_metrics_json(&args.out, &report)?;
            println!("accuracy {:.4}", report.accuracy);
        }
        Command::Roc(args) => {
            let points = run_roc(args)?;
            write_roc_csv(&args.out, &points)?;
            println!("wrote {} points to {}", points.len(), args.out.display());
        }
        Command::Complexity(args) => {
            let query = ComplexityQuery {
                method: MethodId::parse(&args.method)?,
                c: args.c,
                k: args.k,
                n: args.n,
                d: args.d,
                l: args.l,
                q: args.q,
                q2: args.q2,
            };
            println!("{}", complexity_eval(&query)?);
        }
        Command::Bench(args) => {
            let train_args = TrainArgs {
                method: args.method.clone(),
                train: args.train.clone(),
                out: args.out.with_extension("model"),
                seed: args.seed,
                k: args.k,
                k0: args.k0,
                lambda1: 0.01,
                lambda2: 0.003,
                eta: 0.01,
                rho: 0.1,
                gamma: 0.01,
                w: 0.5,
                iters: args.iters,
                mode: "sm".into(),
                nonneg: false,
            };
            let start = Instant::now();
            let model = run_train(&train_args)?;
            let train_secs = start.elapsed().as_secs_f64();
            write_model(&train_args.out, &model)?;

            let mut rows = vec![format!("{},train,{:.6}", args.method, train_secs)];
            if let Some(test) = &args.test {
                let classify_args = ClassifyArgs {
                    model: train_args.out.clone(),
                    data: test.clone(),
                    out: args.out.with_extension("preds.csv"),
                    seed: args.seed,
                    mode: "sm".into(),
                    nonneg: false,
                    lambda: 0.01,
                    eps: 0.0,
                    tau: f64::INFINITY,
                    confuser_class: None,
                };
                let start = Instant::now();
                let (labels, confusers) = run_classify(&classify_args)?;
                let classify_secs = start.elapsed().as_secs_f64();
                write_predictions(&classify_args.out, &labels, &confusers)?;
                rows.push(format!("{},classify,{:.6}", args.method, classify_secs));
            }
            let mut csv = String::from("method,phase,seconds\n");
            for r in rows {
                csv.push_str(&r);
                csv.push('\n');
            }
            std::fs::write(&args.out, csv)?;
            write_manifest(&args.out, Some(args.seed))?;
            println!("wrote {}", args.out.display());
        }
    }
    Ok(())
}

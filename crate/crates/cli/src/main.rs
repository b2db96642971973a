use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use log::info;

use eof_core::bench::{
    build_map, curves_csv, load_csv, read_inputs, results_csv, results_table, timing_csv, write_csv, Bandwidths,
    RawData,
};
use eof_core::design::enumerate_sparse_grid;
use eof_core::learn::default_lambda;
use eof_core::{
    design_for_m, estimate_sigma, read_model, run_benchmark, sparse_grid_size, standardize, write_model, BenchConfig,
    EofMap, FeatureScale, KernelKind, KernelSpec, Method, Model, SavedModel, SyntheticTask, Task, TrainOptions,
};

#[derive(Parser)]
#[command(name = "eof", version, about = "Sparse orthogonal kernel features: embed, train, predict, benchmark")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Embed CSV rows (inputs in [0,1]) and print the sparse feature matrix.
    Embed(EmbedArgs),
    /// Fit a model on a CSV and save it.
    Train(TrainArgs),
    /// Apply a saved model to CSV rows.
    Predict(PredictArgs),
    /// Compare methods over a grid of feature counts.
    Bench(BenchArgs),
    /// Write a synthetic regression CSV with a Laplace-kernel target.
    Synth(SynthArgs),
}

#[derive(Args, Clone)]
struct KernelArgs {
    /// laplace, sobolev or bb.
    #[arg(long, default_value = "laplace")]
    kernel: KernelKind,
    /// Kernel bandwidth; defaults to the nearest-neighbour estimate where data is available.
    #[arg(long)]
    omega: Option<f64>,
    /// Scale features by C instead of sqrt(C).
    #[arg(long)]
    raw_scale: bool,
}

impl KernelArgs {
    fn scale(&self) -> FeatureScale {
        if self.raw_scale {
            FeatureScale::Raw
        } else {
            FeatureScale::Normalized
        }
    }
}

#[derive(Args, Clone)]
struct SizeArgs {
    /// Use the full sparse grid of this level.
    #[arg(long, conflicts_with = "num_features")]
    level: Option<u32>,
    /// Feature count; non-grid sizes truncate the next grid at random.
    #[arg(long)]
    num_features: Option<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SizeArgs {
    fn feature_count(&self, dim: usize) -> Result<usize> {
        match (self.level, self.num_features) {
            (Some(n), _) => Ok(usize::try_from(sparse_grid_size(dim, n)).context("sparse grid too large")?),
            (None, Some(m)) => Ok(m),
            (None, None) => bail!("one of --level or --num-features is required"),
        }
    }
}

#[derive(Args)]
struct EmbedArgs {
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    size: SizeArgs,
    /// Reject inputs outside [0,1] instead of clamping.
    #[arg(long)]
    strict: bool,
    /// CSV with a header row; every column is an input.
    #[arg(long)]
    data: PathBuf,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct DataArgs {
    #[arg(long)]
    data: PathBuf,
    /// Name of the target column.
    #[arg(long, default_value = "y")]
    target: String,
    /// reg or clf.
    #[arg(long, default_value = "reg")]
    task: Task,
    /// Fraction of rows used for training.
    #[arg(long, default_value_t = 0.8)]
    split: f64,
    /// Seed of the train/test split.
    #[arg(long, default_value_t = 0)]
    split_seed: u64,
}

#[derive(Args)]
struct TrainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    #[command(flatten)]
    size: SizeArgs,
    /// eof, rks, orf, lkrf or eerf.
    #[arg(long, default_value = "eof")]
    method: Method,
    /// Random-feature bandwidth; defaults to the nearest-neighbour estimate.
    #[arg(long)]
    sigma: Option<f64>,
    /// Penalty, or `auto` for N^(-1/2).
    #[arg(long, default_value = "auto")]
    lambda: Lambda,
    #[arg(long, default_value_t = 10)]
    pool_factor: usize,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct PredictArgs {
    #[arg(long)]
    model: PathBuf,
    /// CSV with a header row and the model's input columns.
    #[arg(long)]
    data: PathBuf,
    /// Column to drop from the inputs and score against.
    #[arg(long)]
    target: Option<String>,
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BenchArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    kernel: KernelArgs,
    /// Comma-separated methods.
    #[arg(long, value_delimiter = ',', default_value = "eof,rks,orf,lkrf,eerf")]
    methods: Vec<Method>,
    /// Comma-separated feature counts.
    #[arg(long, value_delimiter = ',', required = true)]
    m: Vec<usize>,
    #[arg(long, default_value_t = 10)]
    runs: usize,
    #[arg(long, default_value_t = 7)]
    seed: u64,
    #[arg(long)]
    sigma: Option<f64>,
    #[arg(long, default_value = "auto")]
    lambda: Lambda,
    #[arg(long, default_value_t = 10)]
    pool_factor: usize,
    /// Output directory for results.csv, table.txt, curves.csv and timing.csv.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, default_value_t = 1000)]
    rows: usize,
    #[arg(long, default_value_t = 10.0)]
    omega: f64,
    #[arg(long, default_value_t = 5)]
    centers: usize,
    #[arg(long, default_value_t = 0.05)]
    noise: f64,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

/// Ridge penalty; `auto` means `N^(-1/2)`.
#[derive(Clone, Copy, Debug)]
struct Lambda(Option<f64>);

impl std::str::FromStr for Lambda {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, String> {
        if s == "auto" {
            return Ok(Lambda(None));
        }
        match s.parse::<f64>() {
            Ok(v) if v.is_finite() && v > 0.0 => Ok(Lambda(Some(v))),
            _ => Err(format!("expected a positive number or 'auto', got '{s}'")),
        }
    }
}

fn output(path: Option<&Path>) -> Result<Box<dyn Write>> {
    Ok(match path {
        Some(p) => Box::new(BufWriter::new(File::create(p).with_context(|| format!("creating {}", p.display()))?)),
        None => Box::new(BufWriter::new(io::stdout().lock())),
    })
}

fn embed(args: EmbedArgs) -> Result<()> {
    let (_, rows) = read_inputs(File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?)?;
    let dim = rows.first().map(Vec::len).context("no input rows")?;
    let omega = args.kernel.omega.unwrap_or(1.0);
    let kernel = KernelSpec::new(args.kernel.kernel, omega, dim)?.with_strict(args.strict);
    let design = match args.size.level {
        Some(n) => enumerate_sparse_grid(dim, n)?,
        None => design_for_m(dim, args.size.feature_count(dim)?, args.size.seed)?,
    };
    let map = EofMap::new(kernel, design, args.kernel.scale())?;
    let f = map.embed_batch(&rows)?;
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "# {} {} {}", f.nrows(), f.ncols(), f.nnz())?;
    for (r, c, v) in f.triplets() {
        writeln!(out, "{r},{c},{v}")?;
    }
    out.flush()?;
    Ok(())
}

fn load(args: &DataArgs) -> Result<(RawData, eof_core::Dataset)> {
    let raw =
        load_csv(&args.data, &args.target, args.task).with_context(|| format!("reading {}", args.data.display()))?;
    let data = standardize(&raw, args.task, args.split, args.split_seed)?;
    info!("{} train rows, {} test rows, {} inputs", data.n_train(), data.n_test(), data.dim());
    Ok((raw, data))
}

fn train(args: TrainArgs) -> Result<()> {
    let (_, data) = load(&args.data)?;
    let needs_sigma = args.sigma.is_none() || (args.method == Method::Eof && args.kernel.omega.is_none());
    let estimate = if needs_sigma { Some(estimate_sigma(&data.x_train)?) } else { None };
    let sigma = args.sigma.or(estimate).expect("sigma resolved");
    let bw = Bandwidths {
        sigma,
        omega: args.kernel.omega.or(estimate).unwrap_or(sigma),
        lambda: args.lambda.0.unwrap_or_else(|| default_lambda(data.n_train())),
    };
    let config = BenchConfig {
        kernel: args.kernel.kernel,
        scale: args.kernel.scale(),
        pool_factor: args.pool_factor,
        ..BenchConfig::default()
    };
    let m = args.size.feature_count(data.dim())?;
    let map = build_map(args.method, &data, &config, bw, m, args.size.seed)?;
    let model = Model::train(map, &data.x_train, &data.y_train, data.task, bw.lambda, TrainOptions::default())?;
    let test_error = model.test_error(&data.x_test, &data.y_test)?;
    println!(
        "method={} M={} sigma={} omega={} lambda={} nnz_F={} T_train={:.4}s test_error={:.6}",
        args.method,
        model.map.len(),
        bw.sigma,
        bw.omega,
        bw.lambda,
        model.nnz_f,
        model.train_seconds(),
        test_error
    );
    let saved = SavedModel { model, scaler: data.scaler, target: data.target };
    write_model(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?, &saved)?;
    Ok(())
}

fn predict(args: PredictArgs) -> Result<()> {
    let saved = read_model(File::open(&args.model).with_context(|| format!("opening {}", args.model.display()))?)?;
    let file = File::open(&args.data).with_context(|| format!("opening {}", args.data.display()))?;
    let (rows, truth) = match &args.target {
        Some(t) => {
            let raw = eof_core::bench::read_csv(file, t)?;
            (raw.x, Some(raw.y))
        }
        None => (read_inputs(file)?.1, None),
    };
    let scaled = match &saved.scaler {
        Some(s) => s.transform(&rows)?,
        None => rows,
    };
    let scores = saved.model.predict(&scaled)?;
    let decode = |v: f64| match (saved.model.task, saved.target) {
        (_, Some(enc)) => enc.decode(v),
        (Task::Classification, None) => {
            if v >= 0.0 {
                1.0
            } else {
                -1.0
            }
        }
        (Task::Regression, None) => v,
    };
    let predictions: Vec<f64> = scores.iter().map(|&v| decode(v)).collect();
    let mut out = output(args.out.as_deref())?;
    writeln!(out, "prediction")?;
    for p in &predictions {
        writeln!(out, "{p}")?;
    }
    out.flush()?;
    if let Some(y) = truth {
        let error = match saved.model.task {
            Task::Regression => {
                predictions.iter().zip(&y).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / y.len() as f64
            }
            Task::Classification => predictions.iter().zip(&y).filter(|(p, t)| p != t).count() as f64 / y.len() as f64,
        };
        eprintln!("error={error:.6}");
    }
    Ok(())
}

fn bench(args: BenchArgs) -> Result<()> {
    let (_, data) = load(&args.data)?;
    let config = BenchConfig {
        methods: args.methods,
        m_grid: args.m,
        runs: args.runs,
        seed: args.seed,
        kernel: args.kernel.kernel,
        omega: args.kernel.omega,
        sigma: args.sigma,
        lambda: args.lambda.0,
        pool_factor: args.pool_factor,
        scale: args.kernel.scale(),
        train: TrainOptions::default(),
    };
    let results = run_benchmark(&data, &config)?;
    fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let table = results_table(&results);
    for (name, text) in [
        ("results.csv", results_csv(&results)),
        ("table.txt", table.clone()),
        ("curves.csv", curves_csv(&results)),
        ("timing.csv", timing_csv(&results)),
    ] {
        let path = args.out.join(name);
        fs::write(&path, text).with_context(|| format!("writing {}", path.display()))?;
    }
    print!("{table}");
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let task = SyntheticTask {
        kernel: KernelSpec::laplace(args.omega, args.dim)?,
        n_train: args.rows,
        n_test: 0,
        centers: args.centers,
        noise: args.noise,
        seed: args.seed,
    };
    let data = task.generate()?;
    let raw = RawData {
        feature_names: (1..=args.dim).map(|d| format!("x{d}")).collect(),
        target_name: "y".into(),
        x: data.x_train,
        y: data.y_train,
    };
    write_csv(File::create(&args.out).with_context(|| format!("creating {}", args.out.display()))?, &raw)?;
    Ok(())
}

fn init_threads() -> Result<()> {
    if let Ok(v) = std::env::var("EOF_THREADS") {
        let threads: usize = v.parse().with_context(|| format!("EOF_THREADS must be a positive integer, got '{v}'"))?;
        rayon::ThreadPoolBuilder::new().num_threads(threads.max(1)).build_global()?;
    }
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    init_threads()?;
    match Cli::parse().command {
        Command::Embed(a) => embed(a),
        Command::Train(a) => train(a),
        Command::Predict(a) => predict(a),
        Command::Bench(a) => bench(a),
        Command::Synth(a) => synth(a),
    }
}

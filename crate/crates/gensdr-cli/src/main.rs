//! Command-line surface: dataset generation, training, benchmarking,
//! sampling, and oracle verification.
//!
//! Exit codes: 0 success, 1 check failure or runtime error, 2 usage or
//! configuration error.

use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use gensdr::bench::{run_benchmark, BenchConfig};
use gensdr::interpolant::Schedule;
use gensdr::io::{
    load_model, read_dataset, save_model, write_dataset, write_json, write_matrix_csv,
    write_report_csv, DatasetMeta, ModelFile, SCHEMA_VERSION,
};
use gensdr::oracle::verify_all;
use gensdr::rng::{derive_seed, Stream};
use gensdr::sampler::{generate as sample_flow, make_grid};
use gensdr::simgen::{generate, SimSetting};
use gensdr::trainer::ensemble::{build_kernel_ensemble, train_ensemble, EnsembleConfig};
use gensdr::trainer::{train, TrainConfig, DEFAULT_HIDDEN};
use gensdr::Matrix;

#[derive(Parser)]
#[command(name = "gensdr", about = "Generative sufficient dimension reduction harness")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Path to the JSON configuration for this subcommand.
    #[arg(long)]
    config: PathBuf,
    /// Base seed; every random draw derives from it.
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory (created if missing).
    #[arg(long)]
    out: PathBuf,
    /// Parallel replications (bench only; other commands ignore it).
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Generate a synthetic dataset (data.csv + metadata.json).
    Gen(Common),
    /// Train a model on a dataset directory (model.json + loss.csv).
    Train(Common),
    /// Run benchmark replications (report.csv + aggregate.json).
    Bench(Common),
    /// Draw conditional samples from a fitted model.
    Sample(Common),
    /// Verify the closed-form Gaussian oracle identities.
    OracleVerify {
        /// Optional JSON config selecting the schedule; default checks both.
        #[arg(long)]
        config: Option<PathBuf>,
    },
}

/// Errors carrying their process exit code.
enum AppError {
    /// Bad configuration or usage: exit 2.
    Usage(String),
    /// Failed check or runtime failure: exit 1.
    Failure(String),
}

impl From<gensdr::Error> for AppError {
    fn from(e: gensdr::Error) -> Self {
        match e {
            gensdr::Error::Config(_) | gensdr::Error::Parse(_) => AppError::Usage(e.to_string()),
            other => AppError::Failure(other.to_string()),
        }
    }
}

type AppResult<T> = Result<T, AppError>;

fn read_config<T: for<'de> Deserialize<'de>>(path: &Path) -> AppResult<T> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| AppError::Usage(format!("cannot read config {}: {e}", path.display())))?;
    serde_json::from_str(&text)
        .map_err(|e| AppError::Usage(format!("invalid config {}: {e}", path.display())))
}

fn check_schema(version: u32) -> AppResult<()> {
    if version != SCHEMA_VERSION {
        return Err(AppError::Usage(format!(
            "unsupported schema_version {version}, expected {SCHEMA_VERSION}"
        )));
    }
    Ok(())
}

fn ensure_out(dir: &Path) -> AppResult<()> {
    std::fs::create_dir_all(dir)
        .map_err(|e| AppError::Usage(format!("cannot create {}: {e}", dir.display())))
}

#[derive(Serialize, Deserialize)]
struct GenConfig {
    schema_version: u32,
    setting: SimSetting,
}

fn cmd_gen(c: &Common) -> AppResult<()> {
    let cfg: GenConfig = read_config(&c.config)?;
    check_schema(cfg.schema_version)?;
    cfg.setting.validate()?;
    ensure_out(&c.out)?;
    let ds = generate::<f64>(&cfg.setting, &mut Stream::new(c.seed))?;
    write_dataset(&c.out, &ds, &DatasetMeta::new(cfg.setting, c.seed))?;
    println!("wrote {} observations to {}", cfg.setting.n, c.out.display());
    Ok(())
}

fn default_hidden() -> Vec<usize> {
    DEFAULT_HIDDEN.to_vec()
}

fn default_schedule() -> Schedule {
    Schedule::StraightLine
}

#[derive(Serialize, Deserialize)]
struct TrainCmdConfig {
    schema_version: u32,
    /// Dataset directory written by `gen`.
    data: PathBuf,
    /// Representation dimension; defaults to the dataset's ground truth.
    d: Option<usize>,
    #[serde(default = "default_hidden")]
    hidden_r: Vec<usize>,
    #[serde(default = "default_hidden")]
    hidden_g: Vec<usize>,
    #[serde(default = "default_schedule")]
    schedule: Schedule,
    train: TrainConfig,
    /// Required when the dataset holds SPD responses.
    ensemble: Option<EnsembleConfig>,
}

fn cmd_train(c: &Common) -> AppResult<()> {
    let cfg: TrainCmdConfig = read_config(&c.config)?;
    check_schema(cfg.schema_version)?;
    let (ds, meta) = read_dataset(&cfg.data)?;
    ensure_out(&c.out)?;
    let d = cfg.d.unwrap_or(meta.d);
    let tcfg = TrainConfig { seed: c.seed, ..cfg.train };
    let config_echo = serde_json::to_value(&cfg).map_err(gensdr::Error::from)?;
    let (file, trace) = if meta.spd {
        let ecfg = cfg
            .ensemble
            .ok_or_else(|| AppError::Usage("SPD dataset needs an \"ensemble\" section".into()))?;
        let ys = ds.y.as_spd()?;
        let spec = build_kernel_ensemble(
            ys,
            ecfg.fraction,
            ecfg.m,
            &mut Stream::new(derive_seed(c.seed, 0, "ensemble")),
        )?;
        let (model, trace) =
            train_ensemble(&ds.x, ys, spec, d, &cfg.hidden_g, cfg.schedule, &tcfg, &ecfg)?;
        (ModelFile::from_ensemble(&model, config_echo), trace)
    } else {
        let y = ds.y.as_euclidean()?;
        let (model, trace) =
            train(&ds.x, y, d, &cfg.hidden_r, &cfg.hidden_g, cfg.schedule, &tcfg)?;
        (ModelFile::from_gensdr(&model, config_echo), trace)
    };
    save_model(&c.out.join("model.json"), &file)?;
    let loss = Matrix::column(&trace);
    write_matrix_csv(&c.out.join("loss.csv"), &["loss".into()], &loss)?;
    println!(
        "trained {} epochs, final loss {}",
        trace.len(),
        trace.last().copied().unwrap_or(f64::NAN)
    );
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct BenchCmdConfig {
    schema_version: u32,
    bench: BenchConfig,
}

#[derive(Serialize)]
struct AggregateFile<'a> {
    schema_version: u32,
    mean: f64,
    std: f64,
    n_reps: usize,
    base_seed: u64,
    config: &'a BenchConfig,
}

fn cmd_bench(c: &Common) -> AppResult<()> {
    let cfg: BenchCmdConfig = read_config(&c.config)?;
    check_schema(cfg.schema_version)?;
    ensure_out(&c.out)?;
    let report = run_benchmark(&cfg.bench, c.seed, c.jobs)?;
    write_report_csv(&c.out.join("report.csv"), &report.records)?;
    write_json(
        &c.out.join("aggregate.json"),
        &AggregateFile {
            schema_version: SCHEMA_VERSION,
            mean: report.mean,
            std: report.std,
            n_reps: report.records.len(),
            base_seed: c.seed,
            config: &cfg.bench,
        },
    )?;
    println!("mean dcor {} (std {}) over {} reps", report.mean, report.std, report.records.len());
    Ok(())
}

fn default_n_samples() -> usize {
    1000
}

fn default_k() -> usize {
    100
}

#[derive(Serialize, Deserialize)]
struct SampleCmdConfig {
    schema_version: u32,
    model: PathBuf,
    /// Covariate rows to condition on.
    x: Vec<Vec<f64>>,
    #[serde(default = "default_n_samples")]
    n_samples: usize,
    #[serde(default = "default_k")]
    k: usize,
}

#[derive(Serialize)]
struct SampleSidecar<'a> {
    schema_version: u32,
    x: &'a [f64],
    k: usize,
    tau: f64,
    seed: u64,
}

fn cmd_sample(c: &Common) -> AppResult<()> {
    let cfg: SampleCmdConfig = read_config(&c.config)?;
    check_schema(cfg.schema_version)?;
    if !cfg.model.exists() {
        return Err(AppError::Usage(format!("model file {} not found", cfg.model.display())));
    }
    let model = load_model(&cfg.model)?.to_gensdr()?;
    ensure_out(&c.out)?;
    let grid = make_grid(cfg.k, model.tau)?;
    let header: Vec<String> = (1..=model.d_y).map(|j| format!("y{j}")).collect();
    for (i, x) in cfg.x.iter().enumerate() {
        let seed = derive_seed(c.seed, i as u64, "sample");
        let samples = sample_flow(&model, x, cfg.n_samples, &grid, &mut Stream::new(seed))?;
        write_matrix_csv(&c.out.join(format!("samples_{i}.csv")), &header, &samples)?;
        write_json(
            &c.out.join(format!("samples_{i}.meta.json")),
            &SampleSidecar {
                schema_version: SCHEMA_VERSION,
                x,
                k: cfg.k,
                tau: model.tau,
                seed,
            },
        )?;
    }
    println!("wrote {} sample files to {}", cfg.x.len(), c.out.display());
    Ok(())
}

#[derive(Serialize, Deserialize)]
struct OracleConfig {
    schema_version: u32,
    schedule: Option<Schedule>,
}

fn cmd_oracle(config: Option<&Path>) -> AppResult<()> {
    let schedules: Vec<Schedule> = match config {
        None => vec![Schedule::StraightLine, Schedule::Trigonometric],
        Some(path) => {
            let cfg: OracleConfig = read_config(path)?;
            check_schema(cfg.schema_version)?;
            match cfg.schedule {
                Some(s) => vec![s],
                None => vec![Schedule::StraightLine, Schedule::Trigonometric],
            }
        }
    };
    let mut all_passed = true;
    for sched in schedules {
        println!("schedule {sched:?}");
        for check in verify_all(sched)? {
            let status = if check.passed() { "PASS" } else { "FAIL" };
            println!(
                "  {:<24} max residual {:>12.3e}  (threshold {:.0e})  {status}",
                check.name, check.max_residual, check.threshold
            );
            all_passed &= check.passed();
        }
    }
    if all_passed {
        Ok(())
    } else {
        Err(AppError::Failure("oracle verification failed".into()))
    }
}

fn run(cli: &Cli) -> AppResult<()> {
    match &cli.command {
        Command::Gen(c) => cmd_gen(c),
        Command::Train(c) => cmd_train(c),
        Command::Bench(c) => cmd_bench(c),
        Command::Sample(c) => cmd_sample(c),
        Command::OracleVerify { config } => cmd_oracle(config.as_deref()),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(AppError::Usage(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(2)
        }
        Err(AppError::Failure(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}

//! `batchbandit` command-line simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 I/O error, 4 runtime
//! error. Progress goes to stderr; results go to files under `--out`.

mod config;
mod manifest;

use std::fs::{self, File};
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use batchbandit::datasets::{builtin_by_name, DatasetError};
use batchbandit::evaluation::calibration::calibrate_neutral_eta;
use batchbandit::evaluation::campaign::{experiment_seed, run_dataset_campaign, run_source_records, tally_rows, CampaignError};
use batchbandit::evaluation::metrics::MetricTally;
use batchbandit::evaluation::report;
use batchbandit::evaluation::{bias_demo, convergence_study};
use batchbandit::{EngineError, EnvironmentError, ReplayEnv, ReplayLog, RunTrajectory};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use crate::config::{load_json, BiasArgs, CalibrateArgs, ConvergenceArgs, RunArgs, RunConfig};
use crate::manifest::Manifest;

#[derive(Parser, Debug)]
#[command(name = "batchbandit", version, about = "Bayesian batch bandit simulator")]
struct Cli {
    /// Worker threads, all cores by default; results do not depend on this.
    #[arg(long, global = true, env = "BATCHBANDIT_WORKERS")]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Run a Monte Carlo campaign over a dataset and write metrics.
    Simulate(SimulateArgs),
    /// Run a campaign against a recorded reward log.
    Replay(ReplayArgs),
    /// Grid-search the neutral posterior reshaping parameter.
    CalibrateEta(CalibrateArgs),
    /// Studentized estimator statistics under two-batch adaptive sampling.
    BiasDemo(BiasArgs),
    /// Final optimal probabilities of equivalent best arms.
    Convergence(ConvergenceArgs),
    /// Print a built-in dataset as JSON.
    ExportDataset(ExportArgs),
}

#[derive(Args, Debug)]
struct SimulateArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Built-in dataset: A, A', B or B'.
    #[arg(long)]
    dataset: Option<String>,
    /// Dataset JSON file, instead of a built-in.
    #[arg(long)]
    dataset_file: Option<PathBuf>,
    /// Only run experiments under this hypothesis (H0 or H1).
    #[arg(long)]
    hypothesis: Option<String>,
    /// One-based experiment numbers to run.
    #[arg(long, value_delimiter = ',')]
    experiments: Option<Vec<usize>>,
    /// Reward noise standard deviation.
    #[arg(long)]
    noise_sd: Option<f64>,
}

#[derive(Args, Debug)]
struct ReplayArgs {
    #[command(flatten)]
    run: RunArgs,
    /// Replay log CSV (`batch,arm,value` or `batch,arm,count,mean,sd`).
    #[arg(long)]
    log: Option<PathBuf>,
    /// One-based true best arm; without it the log is treated as an
    /// experiment with no unique winner.
    #[arg(long)]
    best_arm: Option<usize>,
}

#[derive(Args, Debug)]
struct ExportArgs {
    /// Dataset name: A, A', B or B'.
    name: String,
    /// Output file; stdout when absent.
    #[arg(short, long)]
    output: Option<PathBuf>,
}

#[derive(Debug)]
pub enum CliError {
    Config(String),
    Io(String),
    Runtime(String),
}

impl CliError {
    fn code(&self) -> u8 {
        match self {
            CliError::Config(_) => 2,
            CliError::Io(_) => 3,
            CliError::Runtime(_) => 4,
        }
    }
}

impl std::fmt::Display for CliError {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        match self {
            CliError::Config(m) => write!(f, "configuration error: {m}"),
            CliError::Io(m) => write!(f, "I/O error: {m}"),
            CliError::Runtime(m) => write!(f, "runtime error: {m}"),
        }
    }
}

impl From<EngineError> for CliError {
    fn from(e: EngineError) -> Self {
        match e {
            EngineError::Config(_) | EngineError::Allocation(batchbandit::AllocationError::InvalidConfig(_)) => {
                CliError::Config(e.to_string())
            }
            EngineError::Environment(env) => env.into(),
            other => CliError::Runtime(other.to_string()),
        }
    }
}

impl From<EnvironmentError> for CliError {
    fn from(e: EnvironmentError) -> Self {
        match e {
            EnvironmentError::Io(_) => CliError::Io(e.to_string()),
            EnvironmentError::Invalid(_) | EnvironmentError::Parse { .. } => CliError::Config(e.to_string()),
            EnvironmentError::Coverage { .. } => CliError::Runtime(e.to_string()),
        }
    }
}

impl From<DatasetError> for CliError {
    fn from(e: DatasetError) -> Self {
        match e {
            DatasetError::Io(_) => CliError::Io(e.to_string()),
            DatasetError::Environment(env) => env.into(),
            _ => CliError::Config(e.to_string()),
        }
    }
}

impl From<CampaignError> for CliError {
    fn from(e: CampaignError) -> Self {
        match e {
            CampaignError::Engine(e) => e.into(),
            CampaignError::Dataset(e) => e.into(),
            CampaignError::Invalid(m) => CliError::Config(m),
        }
    }
}

pub fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(|e| io_err(path, e))
}

fn write_with(path: &Path, f: impl FnOnce(&mut BufWriter<File>) -> io::Result<()>) -> Result<(), CliError> {
    let mut w = create(path)?;
    f(&mut w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn write_json<T: Serialize + ?Sized>(path: &Path, value: &T) -> Result<(), CliError> {
    let mut w = create(path)?;
    serde_json::to_writer_pretty(&mut w, value).map_err(|e| io_err(path, e))?;
    writeln!(w).and_then(|_| w.flush()).map_err(|e| io_err(path, e))
}

fn prepare_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_err(dir, e))
}

#[derive(Serialize)]
struct TrajectoryEntry<'a> {
    policy: &'a str,
    experiment: usize,
    trajectory: &'a RunTrajectory,
}

fn progress(line: &str) {
    eprintln!("{line}");
}

fn cmd_simulate(args: SimulateArgs, workers: usize) -> Result<(), CliError> {
    let mut cfg = match &args.run.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_run_args(&args.run)?;
    if let Some(d) = args.dataset {
        cfg.dataset = Some(d);
        cfg.dataset_file = None;
    }
    if let Some(f) = args.dataset_file {
        cfg.dataset_file = Some(f);
        cfg.dataset = None;
    }
    if let Some(h) = args.hypothesis {
        cfg.hypothesis = Some(config::parse_hypothesis(&h)?);
    }
    if args.experiments.is_some() {
        cfg.experiments = args.experiments;
    }
    if args.noise_sd.is_some() {
        cfg.noise_sd = args.noise_sd;
    }
    cfg.fill_defaults();

    let dataset = match (&cfg.dataset, &cfg.dataset_file) {
        (_, Some(path)) => {
            let file = File::open(path).map_err(|e| io_err(path, e))?;
            batchbandit::datasets::DatasetSpec::from_json_reader(file)?
        }
        (Some(name), None) => builtin_by_name(name)?,
        (None, None) => return Err(CliError::Config("simulate needs --dataset or --dataset-file".into())),
    };
    let settings = cfg.campaign_settings()?;
    let out = args.run.out_dir();
    prepare_out(&out)?;

    let result = run_dataset_campaign(&dataset, &settings, workers, &mut progress)?;
    let metrics_path = out.join("metrics.csv");
    write_with(&metrics_path, |w| report::write_metrics_csv(&result.metric_rows(), w))?;
    let mut outputs = vec![metrics_path];
    if settings.keep_trajectories {
        let entries: Vec<_> = result
            .outcomes
            .iter()
            .flat_map(|o| {
                o.trajectories.iter().map(move |(e, t)| TrajectoryEntry {
                    policy: o.rule.label(),
                    experiment: e + 1,
                    trajectory: t,
                })
            })
            .collect();
        let path = out.join("trajectories.json");
        write_json(&path, &entries)?;
        outputs.push(path);
    }
    finish("simulate", &cfg, args.run.config.as_deref(), workers, &out, outputs)
}

fn cmd_replay(args: ReplayArgs, workers: usize) -> Result<(), CliError> {
    let mut cfg = match &args.run.config {
        Some(p) => load_json::<RunConfig>(p)?,
        None => RunConfig::default(),
    };
    cfg.apply_run_args(&args.run)?;
    if args.log.is_some() {
        cfg.log = args.log;
    }
    if args.best_arm.is_some() {
        cfg.best_arm = args.best_arm;
    }
    let log_path = cfg
        .log
        .clone()
        .ok_or_else(|| CliError::Config("replay needs --log".into()))?;
    let log = ReplayLog::from_path(&log_path)?;
    cfg.batches.get_or_insert(log.num_batches());
    cfg.fill_defaults();
    let settings = cfg.campaign_settings()?;
    let k = log.num_arms();
    let (hypothesis, best) = match cfg.best_arm {
        Some(b) if b == 0 || b > k => {
            return Err(CliError::Config(format!("--best-arm must lie in 1..={k}, got {b}")))
        }
        Some(b) => (batchbandit::datasets::Hypothesis::H1, Some(b - 1)),
        None => (batchbandit::datasets::Hypothesis::H0, None),
    };
    let env = ReplayEnv::new(log, settings.schedule)?;
    let out = args.run.out_dir();
    prepare_out(&out)?;

    let delta = settings.config.decision.delta;
    let name = log_path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "replay".into());
    let mut rows = Vec::new();
    let mut entries = Vec::new();
    for &rule in &settings.policies {
        let mut config = settings.config.clone().with_rule(rule);
        config.seed = experiment_seed(settings.config.seed, 0);
        let (records, trajectories) = run_source_records(
            &config,
            &env,
            0,
            hypothesis,
            best,
            settings.runs,
            workers,
            settings.keep_trajectories,
        )?;
        let t = MetricTally::from_records(&records, delta);
        rows.extend(tally_rows(&t, rule.label(), &name, settings.config.eta, settings.config.seed));
        entries.extend(trajectories.into_iter().map(|t| (rule, t)));
        progress(&format!("replay {name} {rule}: {} runs done", settings.runs));
    }
    let metrics_path = out.join("metrics.csv");
    write_with(&metrics_path, |w| report::write_metrics_csv(&rows, w))?;
    let mut outputs = vec![metrics_path];
    if settings.keep_trajectories {
        let list: Vec<_> = entries
            .iter()
            .map(|(rule, t)| TrajectoryEntry {
                policy: rule.label(),
                experiment: 1,
                trajectory: t,
            })
            .collect();
        let path = out.join("trajectories.json");
        write_json(&path, &list)?;
        outputs.push(path);
    }
    finish("replay", &cfg, args.run.config.as_deref(), workers, &out, outputs)
}

fn cmd_calibrate(args: CalibrateArgs, workers: usize) -> Result<(), CliError> {
    let settings = args.settings()?;
    let out = args.out_dir();
    prepare_out(&out)?;
    let res = calibrate_neutral_eta(&settings, workers)?;
    progress(&format!("K'={} neutral eta {:.2}", res.k_prime, res.eta_star));
    let path = out.join("calibration.csv");
    write_with(&path, |w| report::write_calibration_csv(&res, w))?;
    finish("calibrate-eta", &settings, args.config.as_deref(), workers, &out, vec![path])
}

fn cmd_bias(args: BiasArgs, workers: usize) -> Result<(), CliError> {
    let cfg = args.config()?;
    let settings = &cfg.settings;
    let rules = cfg.rules.clone().unwrap_or_default();
    let out = args.out_dir();
    prepare_out(&out)?;
    let mut results = Vec::new();
    for rule in &rules {
        let mut s = settings.clone();
        s.rule = *rule;
        let res = bias_demo(&s, workers)?;
        progress(&format!(
            "{rule}: NB z mean {:+.4}, WB z mean {:+.4}",
            res.nb.estimate.mean, res.wb.estimate.mean
        ));
        results.push(res);
    }
    let summary = out.join("bias_summary.csv");
    write_with(&summary, |w| report::write_bias_summary_csv(&results, w))?;
    let histogram = out.join("bias_histogram.csv");
    write_with(&histogram, |w| report::write_bias_histogram_csv(&results, w))?;
    let mut outputs = vec![summary, histogram];
    if args.samples {
        for r in &results {
            let path = out.join(format!("bias_samples_{}.csv", r.rule.label()));
            write_with(&path, |w| report::write_bias_samples_csv(r, w))?;
            outputs.push(path);
        }
    }
    finish("bias-demo", &cfg, args.config.as_deref(), workers, &out, outputs)
}

fn cmd_convergence(args: ConvergenceArgs, workers: usize) -> Result<(), CliError> {
    let settings = args.settings()?;
    let out = args.out_dir();
    prepare_out(&out)?;
    let res = convergence_study(&settings, workers)?;
    progress(&format!(
        "alpha_1 mean {:.4} variance {:.4}; exceedance {:.4}",
        res.alpha1_mean, res.alpha1_variance, res.exceedance.value
    ));
    let summary = out.join("convergence_summary.csv");
    write_with(&summary, |w| report::write_convergence_summary_csv(&res, w))?;
    let alphas = out.join("convergence_alphas.csv");
    write_with(&alphas, |w| report::write_convergence_alphas_csv(&res, w))?;
    finish("convergence", &settings, args.config.as_deref(), workers, &out, vec![summary, alphas])
}

fn cmd_export(args: ExportArgs) -> Result<(), CliError> {
    let dataset = builtin_by_name(&args.name)?;
    let json = dataset.to_json()?;
    match args.output {
        Some(path) => fs::write(&path, json + "\n").map_err(|e| io_err(&path, e)),
        None => {
            let mut stdout = io::stdout().lock();
            writeln!(stdout, "{json}").map_err(|e| CliError::Io(e.to_string()))
        }
    }
}

fn finish<C: Serialize + ?Sized>(
    command: &str,
    config: &C,
    config_file: Option<&Path>,
    workers: usize,
    out: &Path,
    outputs: Vec<PathBuf>,
) -> Result<(), CliError> {
    let manifest = Manifest::new(command, config, config_file, workers, outputs)?;
    let path = out.join("manifest.json");
    write_json(&path, &manifest)?;
    for p in manifest.outputs.iter() {
        eprintln!("wrote {p}");
    }
    eprintln!("wrote {}", path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let workers = cli
        .workers
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()))
        .max(1);
    let result = match cli.command {
        Command::Simulate(a) => cmd_simulate(a, workers),
        Command::Replay(a) => cmd_replay(a, workers),
        Command::CalibrateEta(a) => cmd_calibrate(a, workers),
        Command::BiasDemo(a) => cmd_bias(a, workers),
        Command::Convergence(a) => cmd_convergence(a, workers),
        Command::ExportDataset(a) => cmd_export(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("batchbandit: {e}");
            ExitCode::from(e.code())
        }
    }
}

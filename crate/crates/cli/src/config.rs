//! Run configuration files and flag overrides.

use std::fs;
use std::path::{Path, PathBuf};

use batchbandit::datasets::Hypothesis;
use batchbandit::evaluation::campaign::CampaignSettings;
use batchbandit::evaluation::{BiasDemoSettings, CalibrationSettings, ConvergenceSettings};
use batchbandit::{
    AlphaMethod, BatchSchedule, DecisionRule, ExperimentConfig, SamplingRule, VarianceSetting,
    WeightScheme,
};
use clap::Args;
use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use crate::{io_err, CliError};

const DEFAULT_DRAWS: u64 = 10_000;

/// Reads a JSON configuration. A manifest written by an earlier run is
/// accepted too; its `config` object is used.
pub fn load_json<T: DeserializeOwned>(path: &Path) -> Result<T, CliError> {
    let text = fs::read_to_string(path).map_err(|e| io_err(path, e))?;
    let mut value: serde_json::Value = serde_json::from_str(&text)
        .map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    if value.get("tool").is_some() && value.get("config").is_some() {
        value = value["config"].take();
    }
    serde_json::from_value(value).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))
}

fn parse_named<T: DeserializeOwned>(what: &str, s: &str) -> Result<T, CliError> {
    serde_json::from_value(serde_json::Value::String(s.trim().to_string()))
        .map_err(|_| CliError::Config(format!("unknown {what} '{s}'")))
}

pub fn parse_hypothesis(s: &str) -> Result<Hypothesis, CliError> {
    parse_named("hypothesis", &s.to_ascii_uppercase())
}

pub fn parse_rule(s: &str) -> Result<SamplingRule, CliError> {
    s.parse().map_err(|e: batchbandit::EngineError| CliError::Config(e.to_string()))
}

fn parse_rules(list: &[String]) -> Result<Vec<SamplingRule>, CliError> {
    list.iter().map(|s| parse_rule(s)).collect()
}

pub fn alpha_method(quadrature: bool, draws: Option<u64>) -> AlphaMethod {
    if quadrature {
        AlphaMethod::Quadrature
    } else {
        AlphaMethod::MonteCarlo {
            draws: draws.unwrap_or(DEFAULT_DRAWS),
        }
    }
}

/// Picks an `α` method from flags, keeping `current` when none was given.
fn override_alpha(current: AlphaMethod, quadrature: bool, draws: Option<u64>) -> AlphaMethod {
    if quadrature || draws.is_some() {
        alpha_method(quadrature, draws)
    } else {
        current
    }
}

fn out_or_default(out: &Option<PathBuf>) -> PathBuf {
    out.clone().unwrap_or_else(|| PathBuf::from("out"))
}

/// Flags shared by `simulate` and `replay`.
#[derive(Args, Debug)]
pub struct RunArgs {
    /// JSON config or manifest of an earlier run; flags take precedence.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Output directory.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated policies (Unif, NB-TS, WB-TS, NB-TTTS, WB-TTTS).
    #[arg(long, value_delimiter = ',')]
    pub policies: Option<Vec<String>>,
    /// Posterior reshaping parameter.
    #[arg(long)]
    pub eta: Option<f64>,
    /// Allocation floor per arm.
    #[arg(long)]
    pub gamma: Option<f64>,
    /// Top-two leader probability.
    #[arg(long)]
    pub beta: Option<f64>,
    /// Nominal false positive rate.
    #[arg(long)]
    pub rho: Option<f64>,
    /// Assumed number of equivalent best arms under the null.
    #[arg(long)]
    pub k_prime: Option<u32>,
    /// Decision threshold; overrides the one derived from --rho.
    #[arg(long)]
    pub delta: Option<f64>,
    /// Monte Carlo runs per experiment and policy.
    #[arg(long)]
    pub runs: Option<u64>,
    /// Master seed.
    #[arg(long)]
    pub seed: Option<u64>,
    /// Number of batches.
    #[arg(long)]
    pub batches: Option<u32>,
    /// Batch size, or mean batch size with --poisson.
    #[arg(long)]
    pub batch_size: Option<u64>,
    /// Poisson batch sizes instead of fixed ones.
    #[arg(long)]
    pub poisson: bool,
    /// Monte Carlo draws per optimal-probability estimate.
    #[arg(long)]
    pub alpha_draws: Option<u64>,
    /// Compute optimal probabilities by numerical integration.
    #[arg(long)]
    pub quadrature: bool,
    /// Reward variance: known or estimated.
    #[arg(long)]
    pub variance: Option<String>,
    /// Batch weight for WB statistics: phi_one or phi_sqrt_t.
    #[arg(long)]
    pub weight: Option<String>,
    /// Also write per-run trajectories.
    #[arg(long)]
    pub keep_trajectories: bool,
}

impl RunArgs {
    pub fn out_dir(&self) -> PathBuf {
        out_or_default(&self.out)
    }
}

/// Resolved settings of a `simulate` or `replay` run, as stored in the
/// manifest.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset: Option<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub dataset_file: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub log: Option<PathBuf>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub best_arm: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub hypothesis: Option<Hypothesis>,
    /// One-based experiment numbers.
    #[serde(skip_serializing_if = "Option::is_none")]
    pub experiments: Option<Vec<usize>>,
    pub policies: Option<Vec<SamplingRule>>,
    pub eta: Option<f64>,
    pub gamma: Option<f64>,
    pub beta: Option<f64>,
    pub rho: Option<f64>,
    pub k_prime: Option<u32>,
    pub delta: Option<f64>,
    pub runs: Option<u64>,
    pub seed: Option<u64>,
    pub batches: Option<u32>,
    pub batch_size: Option<u64>,
    pub poisson: Option<bool>,
    pub alpha_draws: Option<u64>,
    pub quadrature: Option<bool>,
    pub variance: Option<VarianceSetting>,
    pub weight: Option<WeightScheme>,
    pub noise_sd: Option<f64>,
    pub keep_trajectories: Option<bool>,
}

impl RunConfig {
    pub fn apply_run_args(&mut self, a: &RunArgs) -> Result<(), CliError> {
        if let Some(p) = &a.policies {
            self.policies = Some(parse_rules(p)?);
        }
        macro_rules! take {
            ($($f:ident),*) => { $( if a.$f.is_some() { self.$f = a.$f; } )* };
        }
        take!(eta, gamma, beta, rho, k_prime, runs, seed, batches, batch_size, alpha_draws);
        if a.delta.is_some() {
            self.delta = a.delta;
        } else if a.rho.is_some() {
            self.delta = None;
        }
        if a.poisson {
            self.poisson = Some(true);
        }
        if a.quadrature {
            self.quadrature = Some(true);
        }
        if a.keep_trajectories {
            self.keep_trajectories = Some(true);
        }
        if let Some(v) = &a.variance {
            self.variance = Some(parse_named("variance setting", v)?);
        }
        if let Some(w) = &a.weight {
            self.weight = Some(parse_named("weight scheme", w)?);
        }
        Ok(())
    }

    /// Replaces every unset field with its default so that the manifest
    /// records the full configuration.
    pub fn fill_defaults(&mut self) {
        let base = ExperimentConfig::default();
        self.policies.get_or_insert_with(|| SamplingRule::ALL.to_vec());
        self.eta.get_or_insert(base.eta);
        self.gamma.get_or_insert(base.gamma);
        self.beta.get_or_insert(base.beta);
        self.rho.get_or_insert(0.10);
        self.k_prime.get_or_insert(2);
        self.runs.get_or_insert(10_000);
        self.seed.get_or_insert(0);
        self.batches.get_or_insert(20);
        self.batch_size.get_or_insert(500);
        self.poisson.get_or_insert(false);
        self.quadrature.get_or_insert(false);
        if self.quadrature == Some(false) {
            self.alpha_draws.get_or_insert(DEFAULT_DRAWS);
        }
        self.variance.get_or_insert(base.variance);
        self.weight.get_or_insert(base.weight);
        self.noise_sd.get_or_insert(1.0);
        self.keep_trajectories.get_or_insert(false);
    }

    /// Campaign settings from a config whose defaults have been filled.
    pub fn campaign_settings(&self) -> Result<CampaignSettings, CliError> {
        let k_prime = self.k_prime.unwrap_or(2);
        let decision = match self.delta {
            Some(d) => DecisionRule::with_threshold(d, k_prime),
            None => DecisionRule::from_fpr(self.rho.unwrap_or(0.10), k_prime),
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let base = ExperimentConfig::default();
        let config = ExperimentConfig {
            gamma: self.gamma.unwrap_or(base.gamma),
            eta: self.eta.unwrap_or(base.eta),
            beta: self.beta.unwrap_or(base.beta),
            decision,
            variance: self.variance.unwrap_or(base.variance),
            weight: self.weight.unwrap_or(base.weight),
            alpha_method: alpha_method(self.quadrature.unwrap_or(false), self.alpha_draws),
            seed: self.seed.unwrap_or(0),
            ..base
        };
        let (lambda, batches) = (self.batch_size.unwrap_or(500), self.batches.unwrap_or(20));
        let schedule = if self.poisson.unwrap_or(false) {
            BatchSchedule::poisson(lambda, batches)
        } else {
            BatchSchedule::fixed(lambda, batches)
        };
        let experiments = match &self.experiments {
            Some(list) => Some(
                list.iter()
                    .map(|&e| {
                        e.checked_sub(1)
                            .ok_or_else(|| CliError::Config("experiment numbers start at 1".into()))
                    })
                    .collect::<Result<Vec<_>, _>>()?,
            ),
            None => None,
        };
        Ok(CampaignSettings {
            config,
            policies: self.policies.clone().unwrap_or_else(|| SamplingRule::ALL.to_vec()),
            runs: self.runs.unwrap_or(10_000),
            schedule,
            noise_sd: self.noise_sd.unwrap_or(1.0),
            hypothesis: self.hypothesis,
            experiments,
            keep_trajectories: self.keep_trajectories.unwrap_or(false),
        })
    }
}

#[derive(Args, Debug)]
pub struct CalibrateArgs {
    /// JSON calibration settings or manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Number of equivalent arms.
    #[arg(long)]
    pub k_prime: Option<u32>,
    /// Comma-separated grid of reshaping values.
    #[arg(long, value_delimiter = ',')]
    pub grid: Option<Vec<f64>>,
    #[arg(long)]
    pub runs: Option<u64>,
    /// Samples per arm over the whole run.
    #[arg(long)]
    pub samples_per_arm: Option<u64>,
    #[arg(long)]
    pub batches: Option<u32>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub alpha_draws: Option<u64>,
    #[arg(long)]
    pub quadrature: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl CalibrateArgs {
    pub fn out_dir(&self) -> PathBuf {
        out_or_default(&self.out)
    }

    pub fn settings(&self) -> Result<CalibrationSettings, CliError> {
        let mut s = match &self.config {
            Some(p) => load_json(p)?,
            None => CalibrationSettings::default(),
        };
        if let Some(v) = self.k_prime {
            s.k_prime = v;
        }
        if let Some(v) = &self.grid {
            s.grid = v.clone();
        }
        if let Some(v) = self.runs {
            s.runs = v;
        }
        if let Some(v) = self.samples_per_arm {
            s.samples_per_arm = v;
        }
        if let Some(v) = self.batches {
            s.num_batches = v;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.alpha_method = override_alpha(s.alpha_method, self.quadrature, self.alpha_draws);
        Ok(s)
    }
}

/// Bias demo settings with the list of rules to run.
#[derive(Debug, Clone, Default, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasConfig {
    pub rules: Option<Vec<SamplingRule>>,
    #[serde(flatten)]
    pub settings: BiasDemoSettings,
}

#[derive(Args, Debug)]
pub struct BiasArgs {
    /// JSON bias-demo settings or manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Comma-separated rules; all four Bayesian rules by default.
    #[arg(long, value_delimiter = ',')]
    pub rules: Option<Vec<String>>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub batch_size: Option<u64>,
    /// Comma-separated arm means; the first arm is studied.
    #[arg(long, value_delimiter = ',', allow_hyphen_values = true)]
    pub means: Option<Vec<f64>>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    #[arg(long)]
    pub alpha_draws: Option<u64>,
    #[arg(long)]
    pub quadrature: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    /// Also write the per-run statistics.
    #[arg(long)]
    pub samples: bool,
}

impl BiasArgs {
    pub fn out_dir(&self) -> PathBuf {
        out_or_default(&self.out)
    }

    pub fn config(&self) -> Result<BiasConfig, CliError> {
        let mut c: BiasConfig = match &self.config {
            Some(p) => load_json(p)?,
            None => BiasConfig::default(),
        };
        let s = &mut c.settings;
        if let Some(r) = &self.rules {
            c.rules = Some(parse_rules(r)?);
        }
        if let Some(v) = self.runs {
            s.runs = v;
        }
        if let Some(v) = self.batch_size {
            s.batch_size = v;
        }
        if let Some(v) = &self.means {
            s.means = v.clone();
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.beta {
            s.beta = v;
        }
        if let Some(v) = self.gamma {
            s.gamma = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.alpha_method = override_alpha(s.alpha_method, self.quadrature, self.alpha_draws);
        c.rules.get_or_insert_with(|| SamplingRule::BAYESIAN.to_vec());
        Ok(c)
    }
}

#[derive(Args, Debug)]
pub struct ConvergenceArgs {
    /// JSON convergence settings or manifest of an earlier run.
    #[arg(long)]
    pub config: Option<PathBuf>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Total number of arms.
    #[arg(long)]
    pub k: Option<usize>,
    /// Number of equivalent best arms.
    #[arg(long)]
    pub k_prime: Option<u32>,
    #[arg(long)]
    pub rule: Option<String>,
    #[arg(long)]
    pub eta: Option<f64>,
    #[arg(long)]
    pub runs: Option<u64>,
    #[arg(long)]
    pub batches: Option<u32>,
    #[arg(long)]
    pub batch_size: Option<u64>,
    /// Gap between the equivalent best arms and the rest.
    #[arg(long)]
    pub inferior_gap: Option<f64>,
    #[arg(long)]
    pub rho: Option<f64>,
    #[arg(long)]
    pub alpha_draws: Option<u64>,
    #[arg(long)]
    pub quadrature: bool,
    #[arg(long)]
    pub seed: Option<u64>,
}

impl ConvergenceArgs {
    pub fn out_dir(&self) -> PathBuf {
        out_or_default(&self.out)
    }

    pub fn settings(&self) -> Result<ConvergenceSettings, CliError> {
        let mut s: ConvergenceSettings = match &self.config {
            Some(p) => load_json(p)?,
            None => ConvergenceSettings::default(),
        };
        if let Some(v) = self.k {
            s.k = v;
        }
        if let Some(v) = self.k_prime {
            s.k_prime = v;
        }
        if let Some(r) = &self.rule {
            s.rule = parse_rule(r)?;
        }
        if let Some(v) = self.eta {
            s.eta = v;
        }
        if let Some(v) = self.runs {
            s.runs = v;
        }
        if let Some(v) = self.batches {
            s.num_batches = v;
        }
        if let Some(v) = self.batch_size {
            s.batch_size = v;
        }
        if let Some(v) = self.inferior_gap {
            s.inferior_gap = v;
        }
        if let Some(v) = self.rho {
            s.rho = v;
        }
        if let Some(v) = self.seed {
            s.seed = v;
        }
        s.alpha_method = override_alpha(s.alpha_method, self.quadrature, self.alpha_draws);
        Ok(s)
    }
}

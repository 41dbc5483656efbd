//! Monte Carlo campaigns over datasets and policies.
//!
//! Experiment `i` (zero-based) of a dataset runs under the seed
//! `substream_seed(master, i + 1)`, and its run `r` under
//! `substream_seed(that, r)`. Every policy and every `η` therefore sees the
//! same run seeds (common random numbers).

use serde::{Deserialize, Serialize};

use crate::datasets::{DatasetError, DatasetSpec, Hypothesis};
use crate::engine::{run_monte_carlo_map, substream_seed, EngineError, ExperimentConfig, RunTrajectory, SamplingRule};
use crate::environment::{BatchSchedule, RewardSource};
use crate::evaluation::metrics::{DecisionRecord, MetricTally, Precision};
use crate::evaluation::report::MetricRow;

/// Everything that determines a dataset campaign besides the dataset itself.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CampaignSettings {
    /// Base configuration; `rule` is replaced by each policy and `seed` is
    /// the master seed.
    pub config: ExperimentConfig,
    pub policies: Vec<SamplingRule>,
    pub runs: u64,
    pub schedule: BatchSchedule,
    pub noise_sd: f64,
    /// Restrict the campaign to experiments under one hypothesis.
    pub hypothesis: Option<Hypothesis>,
    /// Restrict the campaign to these experiment indices (zero-based).
    pub experiments: Option<Vec<usize>>,
    pub keep_trajectories: bool,
}

impl Default for CampaignSettings {
    fn default() -> Self {
        Self {
            config: ExperimentConfig::default(),
            policies: SamplingRule::ALL.to_vec(),
            runs: 10_000,
            schedule: BatchSchedule::default(),
            noise_sd: 1.0,
            hypothesis: None,
            experiments: None,
            keep_trajectories: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PolicyOutcome {
    pub rule: SamplingRule,
    pub records: Vec<DecisionRecord>,
    /// `(experiment, trajectory)` pairs, when requested.
    pub trajectories: Vec<(usize, RunTrajectory)>,
}

impl PolicyOutcome {
    pub fn tally(&self, delta: f64) -> MetricTally {
        MetricTally::from_records(&self.records, delta)
    }

    pub fn experiment_tally(&self, experiment: usize, delta: f64) -> MetricTally {
        MetricTally::from_records(self.records.iter().filter(|r| r.experiment == experiment), delta)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct CampaignResult {
    pub dataset: String,
    pub settings: CampaignSettings,
    pub experiments: Vec<usize>,
    pub outcomes: Vec<PolicyOutcome>,
}

impl CampaignResult {
    pub fn outcome(&self, rule: SamplingRule) -> Option<&PolicyOutcome> {
        self.outcomes.iter().find(|o| o.rule == rule)
    }

    /// Aggregate rows per policy followed by per-experiment rows, whose
    /// dataset column reads `<dataset>:<experiment number>`.
    pub fn metric_rows(&self) -> Vec<MetricRow> {
        let delta = self.settings.config.decision.delta;
        let eta = self.settings.config.eta;
        let seed = self.settings.config.seed;
        let mut rows = Vec::new();
        for o in &self.outcomes {
            rows.extend(tally_rows(&o.tally(delta), o.rule.label(), &self.dataset, eta, seed));
        }
        for o in &self.outcomes {
            for &e in &self.experiments {
                let name = format!("{}:{}", self.dataset, e + 1);
                rows.extend(tally_rows(&o.experiment_tally(e, delta), o.rule.label(), &name, eta, seed));
            }
        }
        rows
    }
}

/// Metric rows for one tally; metrics without data are omitted.
pub fn tally_rows(t: &MetricTally, policy: &str, dataset: &str, eta: f64, seed: u64) -> Vec<MetricRow> {
    let row = |metric: &str, value: Option<f64>, lo: Option<f64>, hi: Option<f64>, runs: u64| MetricRow {
        metric: metric.to_string(),
        policy: policy.to_string(),
        dataset: dataset.to_string(),
        eta,
        value,
        ci_lo: lo,
        ci_hi: hi,
        runs,
        seed,
    };
    let mut rows = Vec::new();
    if let Some(r) = t.fpr() {
        rows.push(row("fpr", Some(r.value), Some(r.ci_lo), Some(r.ci_hi), t.h0_runs));
    }
    if let Some(r) = t.power() {
        rows.push(row("power", Some(r.value), Some(r.ci_lo), Some(r.ci_hi), t.h1_runs));
    }
    let total = t.h0_runs + t.h1_runs;
    match t.precision() {
        Precision::Defined(r) => rows.push(row("precision", Some(r.value), Some(r.ci_lo), Some(r.ci_hi), total)),
        Precision::NoClaims => rows.push(row("precision", None, None, None, total)),
    }
    if let Some(m) = t.regret() {
        rows.push(row("regret", Some(m.mean), Some(m.ci_lo), Some(m.ci_hi), t.h1_runs));
    }
    rows
}

/// Runs `runs` experiments against one source and records their decisions.
/// Run `r` uses `substream_seed(config.seed, r)`.
#[allow(clippy::too_many_arguments)]
pub fn run_source_records<S: RewardSource + ?Sized>(
    config: &ExperimentConfig,
    source: &S,
    experiment: usize,
    hypothesis: Hypothesis,
    true_best: Option<usize>,
    runs: u64,
    workers: usize,
    keep_trajectories: bool,
) -> Result<(Vec<DecisionRecord>, Vec<RunTrajectory>), EngineError> {
    let out = run_monte_carlo_map(config, source, runs, workers, keep_trajectories, |run, t| {
        let record = DecisionRecord {
            experiment,
            run,
            hypothesis,
            true_best,
            final_alpha: t.final_alpha.clone(),
            winner: t.winner,
            counts: t.counts.clone(),
            total: t.total,
        };
        (record, keep_trajectories.then_some(t))
    })?;
    let mut records = Vec::with_capacity(out.len());
    let mut trajectories = Vec::new();
    for (r, t) in out {
        records.push(r);
        if let Some(t) = t {
            trajectories.push(t);
        }
    }
    Ok((records, trajectories))
}

/// Seed of experiment `index` (zero-based) under the master seed.
pub fn experiment_seed(master: u64, index: usize) -> u64 {
    substream_seed(master, index as u64 + 1)
}

#[derive(Debug, thiserror::Error)]
pub enum CampaignError {
    #[error(transparent)]
    Engine(#[from] EngineError),
    #[error(transparent)]
    Dataset(#[from] DatasetError),
    #[error("invalid campaign: {0}")]
    Invalid(String),
}

/// Runs every selected experiment of `dataset` under every policy.
/// `progress` receives one line per finished (experiment, policy) pair.
pub fn run_dataset_campaign(
    dataset: &DatasetSpec,
    settings: &CampaignSettings,
    workers: usize,
    progress: &mut dyn FnMut(&str),
) -> Result<CampaignResult, CampaignError> {
    dataset.validate()?;
    if settings.policies.is_empty() {
        return Err(CampaignError::Invalid("no policies selected".into()));
    }
    if settings.runs == 0 {
        return Err(CampaignError::Invalid("need at least one run".into()));
    }
    let experiments: Vec<usize> = (0..dataset.experiments.len())
        .filter(|&i| settings.hypothesis.is_none_or(|h| dataset.experiments[i].hypothesis == h))
        .filter(|i| settings.experiments.as_ref().is_none_or(|sel| sel.contains(i)))
        .collect();
    if experiments.is_empty() {
        return Err(CampaignError::Invalid("no experiments match the selection".into()));
    }
    let mut outcomes: Vec<PolicyOutcome> = settings
        .policies
        .iter()
        .map(|&rule| PolicyOutcome {
            rule,
            records: Vec::new(),
            trajectories: Vec::new(),
        })
        .collect();
    for &i in &experiments {
        let spec = &dataset.experiments[i];
        let env = spec.environment(settings.noise_sd, settings.schedule)?;
        for outcome in &mut outcomes {
            let mut config = settings.config.clone().with_rule(outcome.rule);
            config.seed = experiment_seed(settings.config.seed, i);
            let (records, trajectories) = run_source_records(
                &config,
                &env,
                i,
                spec.hypothesis,
                spec.true_best(),
                settings.runs,
                workers,
                settings.keep_trajectories,
            )?;
            outcome.records.extend(records);
            outcome.trajectories.extend(trajectories.into_iter().map(|t| (i, t)));
            progress(&format!(
                "{} experiment {}/{} ({}) {}: {} runs done",
                dataset.name,
                i + 1,
                dataset.experiments.len(),
                spec.hypothesis,
                outcome.rule,
                settings.runs
            ));
        }
    }
    Ok(CampaignResult {
        dataset: dataset.name.clone(),
        settings: settings.clone(),
        experiments,
        outcomes,
    })
}

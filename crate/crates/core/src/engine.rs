//! Runs batch bandit experiments and seeded Monte Carlo campaigns.
//!
//! One experiment proceeds batch by batch: batch 1 is served uniformly;
//! after every batch the posteriors are updated, optimal probabilities are
//! computed from the reshaped posteriors, and the rule's traffic target
//! (floored at `γ`) is used for the next batch. After the last batch the
//! winner is decided from the final optimal probabilities.
//!
//! # Random streams
//!
//! Every run owns a 64-bit seed. Randomness is drawn from `ChaCha8Rng`
//! seeded with it: stream 0 feeds the environment, and stream `b` feeds the
//! optimal-probability computation after batch `b`. Run `r` (one-based) of a
//! campaign uses `substream_seed(master, r)`, so results do not depend on the
//! worker count or execution order.

use std::fmt;
use std::str::FromStr;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::{
    apply_floor, decide_winner, ts_target, ttts_target, Allocation, AllocationError, AlphaMethod,
    DecisionRule, OptimalProbs,
};
use crate::environment::{EnvironmentError, RewardSource};
use crate::posterior::{
    GaussianPosterior, PosteriorError, PosteriorSet, StatisticScheme, VarianceMode, WeightScheme,
    DEFAULT_VARIANCE_FLOOR,
};
use crate::summary::BatchSummary;

#[derive(Debug, Error)]
pub enum EngineError {
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Posterior(#[from] PosteriorError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

/// Traffic allocation policy.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum SamplingRule {
    #[serde(rename = "Unif")]
    Uniform,
    #[serde(rename = "NB-TS")]
    NbTs,
    #[serde(rename = "WB-TS")]
    WbTs,
    #[serde(rename = "NB-TTTS")]
    NbTtts,
    #[serde(rename = "WB-TTTS")]
    WbTtts,
}

impl SamplingRule {
    pub const ALL: [SamplingRule; 5] = [
        SamplingRule::Uniform,
        SamplingRule::NbTs,
        SamplingRule::WbTs,
        SamplingRule::NbTtts,
        SamplingRule::WbTtts,
    ];

    pub const BAYESIAN: [SamplingRule; 4] = [
        SamplingRule::NbTs,
        SamplingRule::WbTs,
        SamplingRule::NbTtts,
        SamplingRule::WbTtts,
    ];

    pub fn label(self) -> &'static str {
        match self {
            SamplingRule::Uniform => "Unif",
            SamplingRule::NbTs => "NB-TS",
            SamplingRule::WbTs => "WB-TS",
            SamplingRule::NbTtts => "NB-TTTS",
            SamplingRule::WbTtts => "WB-TTTS",
        }
    }

    /// Posterior scheme used for allocation and the final decision. The
    /// uniform baseline decides with naive-batch posteriors.
    pub fn statistic(self) -> StatisticScheme {
        match self {
            SamplingRule::WbTs | SamplingRule::WbTtts => StatisticScheme::Weighted,
            _ => StatisticScheme::Naive,
        }
    }

    pub fn is_adaptive(self) -> bool {
        self != SamplingRule::Uniform
    }
}

impl fmt::Display for SamplingRule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.label())
    }
}

impl FromStr for SamplingRule {
    type Err = EngineError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        let norm: String = s
            .chars()
            .filter(|c| c.is_ascii_alphanumeric())
            .collect::<String>()
            .to_ascii_lowercase();
        match norm.as_str() {
            "unif" | "uniform" => Ok(SamplingRule::Uniform),
            "nbts" => Ok(SamplingRule::NbTs),
            "wbts" => Ok(SamplingRule::WbTs),
            "nbttts" => Ok(SamplingRule::NbTtts),
            "wbttts" => Ok(SamplingRule::WbTtts),
            _ => Err(EngineError::Config(format!(
                "unknown sampling rule {s:?} (expected Unif, NB-TS, WB-TS, NB-TTTS or WB-TTTS)"
            ))),
        }
    }
}

/// Where reward variances come from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceSetting {
    /// Use the environment's true variances.
    Known,
    /// Re-estimate after every batch from all data so far.
    #[default]
    Estimated,
}

/// Policy and decision parameters of one experiment. The arms and batch
/// schedule come from the [`RewardSource`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ExperimentConfig {
    pub rule: SamplingRule,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    pub decision: DecisionRule,
    pub variance: VarianceSetting,
    /// Variance used before an arm has two samples in estimated mode.
    pub default_sigma_sq: f64,
    pub variance_floor: f64,
    pub weight: WeightScheme,
    pub alpha_method: AlphaMethod,
    pub seed: u64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            rule: SamplingRule::WbTtts,
            gamma: 0.01,
            eta: 1.0,
            beta: 0.5,
            decision: DecisionRule::default(),
            variance: VarianceSetting::Estimated,
            default_sigma_sq: 1.0,
            variance_floor: DEFAULT_VARIANCE_FLOOR,
            weight: WeightScheme::PhiOne,
            alpha_method: AlphaMethod::default(),
            seed: 0,
        }
    }
}

impl ExperimentConfig {
    pub fn with_rule(mut self, rule: SamplingRule) -> Self {
        self.rule = rule;
        self
    }

    pub fn validate(&self, num_arms: usize) -> Result<(), EngineError> {
        let bad = |m: String| Err(EngineError::Config(m));
        if num_arms == 0 {
            return bad("need at least one arm".into());
        }
        if !(self.gamma >= 0.0) || self.gamma * num_arms as f64 >= 1.0 {
            return bad(format!("gamma must satisfy 0 <= gamma*K < 1, got gamma={} K={num_arms}", self.gamma));
        }
        if !(self.eta > 0.0) || !self.eta.is_finite() {
            return bad(format!("eta must be positive, got {}", self.eta));
        }
        if !(self.beta > 0.0 && self.beta <= 1.0) {
            return bad(format!("beta must lie in (0, 1], got {}", self.beta));
        }
        if !(self.decision.delta > 0.0 && self.decision.delta < 1.0) {
            return bad(format!("delta must lie in (0, 1), got {}", self.decision.delta));
        }
        if !(self.default_sigma_sq > 0.0) || !self.default_sigma_sq.is_finite() {
            return bad("default variance must be positive".into());
        }
        if !(self.variance_floor > 0.0) {
            return bad("variance floor must be positive".into());
        }
        if let AlphaMethod::MonteCarlo { draws } = self.alpha_method {
            if draws < crate::allocation::MIN_ALPHA_DRAWS {
                return bad(format!(
                    "alpha draws must be at least {}, got {draws}",
                    crate::allocation::MIN_ALPHA_DRAWS
                ));
            }
        }
        Ok(())
    }

    fn variance_mode<S: RewardSource + ?Sized>(&self, source: &S) -> Result<VarianceMode, EngineError> {
        match self.variance {
            VarianceSetting::Known => source.known_variances().map(VarianceMode::Known).ok_or_else(|| {
                EngineError::Config("known variance mode needs an environment with known variances".into())
            }),
            VarianceSetting::Estimated => Ok(VarianceMode::Estimated {
                fallback: self.default_sigma_sq,
                floor: self.variance_floor,
            }),
        }
    }

    pub fn new_posteriors<S: RewardSource + ?Sized>(&self, source: &S) -> Result<PosteriorSet, EngineError> {
        Ok(PosteriorSet::new(
            source.num_arms(),
            self.variance_mode(source)?,
            self.rule.statistic(),
            self.weight,
        )?)
    }
}

/// SplitMix64 finalizer.
pub fn splitmix64(x: u64) -> u64 {
    let mut z = x.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Seed of substream `index` under `master`:
/// `splitmix64(master ^ splitmix64(index))`.
pub fn substream_seed(master: u64, index: u64) -> u64 {
    splitmix64(master ^ splitmix64(index))
}

/// `ChaCha8Rng` seeded with `seed`, positioned on `stream`.
pub fn stream_rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(stream);
    rng
}

/// Computes the traffic for the next batch from the posteriors so far.
#[derive(Debug, Clone, Copy)]
pub struct Allocator<'a> {
    config: &'a ExperimentConfig,
}

impl<'a> Allocator<'a> {
    pub fn new(config: &'a ExperimentConfig) -> Self {
        Self { config }
    }

    /// Optimal probabilities after `completed` batches, drawn from that
    /// batch's random stream.
    pub fn optimal_probs(
        &self,
        posteriors: &[GaussianPosterior],
        completed: u32,
        seed: u64,
    ) -> Result<OptimalProbs, EngineError> {
        let mut rng = stream_rng(seed, completed as u64);
        Ok(self.config.alpha_method.compute(posteriors, self.config.eta, &mut rng)?)
    }

    /// Allocation for batch `posteriors.num_batches() + 1`, plus the optimal
    /// probabilities behind it when the rule needed them.
    pub fn next_allocation(
        &self,
        posteriors: &PosteriorSet,
        seed: u64,
    ) -> Result<(Allocation, Option<OptimalProbs>), EngineError> {
        let k = posteriors.num_arms();
        if !self.config.rule.is_adaptive() || !posteriors.all_informed() {
            return Ok((Allocation::uniform(k), None));
        }
        let completed = posteriors.num_batches() as u32;
        let alpha = self.optimal_probs(posteriors.posteriors(), completed, seed)?;
        let target = match self.config.rule {
            SamplingRule::NbTs | SamplingRule::WbTs => ts_target(&alpha),
            _ => ttts_target(&alpha, self.config.beta)?,
        };
        Ok((apply_floor(&target, self.config.gamma)?, Some(alpha)))
    }
}

/// One served batch.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchRecord {
    pub batch: u32,
    pub allocation: Vec<f64>,
    pub summaries: Vec<BatchSummary>,
    /// Optimal probabilities after updating on this batch, when computed.
    pub alpha: Option<Vec<f64>>,
}

/// Result of one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunTrajectory {
    pub seed: u64,
    pub rule: SamplingRule,
    /// Empty unless the trajectory was requested in full.
    pub batches: Vec<BatchRecord>,
    pub final_alpha: Vec<f64>,
    pub final_posteriors: Vec<GaussianPosterior>,
    pub winner: Option<usize>,
    pub counts: Vec<u64>,
    pub total: u64,
}

/// Runs one experiment with the given run seed, keeping every batch.
pub fn run_experiment<S: RewardSource + ?Sized>(
    config: &ExperimentConfig,
    source: &S,
    seed: u64,
) -> Result<RunTrajectory, EngineError> {
    simulate(config, source, seed, true)
}

/// Runs one experiment; `keep_batches` controls whether per-batch records
/// are retained.
pub fn simulate<S: RewardSource + ?Sized>(
    config: &ExperimentConfig,
    source: &S,
    seed: u64,
    keep_batches: bool,
) -> Result<RunTrajectory, EngineError> {
    let k = source.num_arms();
    config.validate(k)?;
    let num_batches = source.schedule().num_batches;
    let allocator = Allocator::new(config);
    let mut posteriors = config.new_posteriors(source)?;
    let mut env_rng = stream_rng(seed, 0);
    let mut batches = Vec::with_capacity(if keep_batches { num_batches as usize } else { 0 });
    let mut allocation = Allocation::uniform(k);

    for b in 1..=num_batches {
        let summaries = source.draw_batch(&allocation, b, &mut env_rng)?;
        posteriors.observe(&summaries)?;
        let (next, alpha) = if b < num_batches {
            allocator.next_allocation(&posteriors, seed)?
        } else {
            (Allocation::uniform(k), None)
        };
        if keep_batches {
            batches.push(BatchRecord {
                batch: b,
                allocation: std::mem::take(&mut allocation.e),
                summaries,
                alpha: alpha.as_ref().map(|a| a.alpha.clone()),
            });
        }
        allocation = next;
    }

    if !posteriors.all_informed() {
        let arm = posteriors
            .posteriors()
            .iter()
            .position(|p| !p.is_informed())
            .unwrap_or(0);
        return Err(AllocationError::Uninformed { arm }.into());
    }
    let final_alpha = allocator.optimal_probs(posteriors.posteriors(), num_batches, seed)?;
    if keep_batches {
        if let Some(last) = batches.last_mut() {
            last.alpha = Some(final_alpha.alpha.clone());
        }
    }
    let winner = decide_winner(&final_alpha, &config.decision);
    let counts = posteriors.total_counts();
    let total = counts.iter().sum();
    Ok(RunTrajectory {
        seed,
        rule: config.rule,
        batches,
        final_alpha: final_alpha.alpha,
        final_posteriors: posteriors.posteriors().to_vec(),
        winner,
        counts,
        total,
    })
}

/// Runs `num_runs` seeded experiments and maps each trajectory through `f`
/// as soon as it completes. Run `r` (one-based) uses
/// `substream_seed(config.seed, r)`. Results are in run order and do not
/// depend on `workers`.
pub fn run_monte_carlo_map<S, T, F>(
    config: &ExperimentConfig,
    source: &S,
    num_runs: u64,
    workers: usize,
    keep_batches: bool,
    f: F,
) -> Result<Vec<T>, EngineError>
where
    S: RewardSource + ?Sized,
    T: Send,
    F: Fn(u64, RunTrajectory) -> T + Sync + Send,
{
    if num_runs == 0 {
        return Err(EngineError::Config("need at least one run".into()));
    }
    config.validate(source.num_arms())?;
    let job = |r: u64| {
        let seed = substream_seed(config.seed, r);
        simulate(config, source, seed, keep_batches).map(|t| f(r, t))
    };
    if workers <= 1 {
        return (1..=num_runs).map(job).collect();
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| EngineError::Config(format!("cannot start worker pool: {e}")))?;
    pool.install(|| (1..=num_runs).into_par_iter().map(job).collect())
}

/// Runs `num_runs` seeded experiments and returns their full trajectories.
pub fn run_monte_carlo<S: RewardSource + ?Sized>(
    config: &ExperimentConfig,
    source: &S,
    num_runs: u64,
    workers: usize,
) -> Result<Vec<RunTrajectory>, EngineError> {
    run_monte_carlo_map(config, source, num_runs, workers, true, |_, t| t)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::environment::{ArmSpec, BatchSchedule, SyntheticEnv, Trend};

    fn env(means: &[f64], lambda: u64, batches: u32) -> SyntheticEnv {
        let arms = means
            .iter()
            .map(|&m| ArmSpec::new(m, 1.0, Trend::Stationary).unwrap())
            .collect();
        SyntheticEnv::new(arms, BatchSchedule::fixed(lambda, batches)).unwrap()
    }

    fn quick(rule: SamplingRule) -> ExperimentConfig {
        ExperimentConfig {
            rule,
            alpha_method: AlphaMethod::Quadrature,
            seed: 7,
            ..Default::default()
        }
    }

    #[test]
    fn rule_labels_round_trip() {
        for rule in SamplingRule::ALL {
            assert_eq!(rule.label().parse::<SamplingRule>().unwrap(), rule);
            let json = serde_json::to_string(&rule).unwrap();
            assert_eq!(json, format!("\"{}\"", rule.label()));
        }
        assert_eq!("wb_ttts".parse::<SamplingRule>().unwrap(), SamplingRule::WbTtts);
        assert!("xx".parse::<SamplingRule>().is_err());
    }

    #[test]
    fn substream_seeds_are_distinct() {
        let seeds: std::collections::HashSet<u64> = (1..=10_000).map(|r| substream_seed(42, r)).collect();
        assert_eq!(seeds.len(), 10_000);
        assert_ne!(substream_seed(1, 1), substream_seed(2, 1));
    }

    #[test]
    fn uniform_rule_is_exactly_uniform() {
        let e = env(&[0.2, 0.0, 0.0, -0.1, 0.3, 0.0, 0.1], 500, 5);
        let t = run_experiment(&quick(SamplingRule::Uniform), &e, 3).unwrap();
        for b in &t.batches {
            assert!(b.allocation.iter().all(|&x| x == 1.0 / 7.0));
        }
        assert_eq!(t.batches.len(), 5);
        assert_eq!(t.total, 2500);
    }

    #[test]
    fn floor_respected_and_first_batch_uniform() {
        let e = env(&[0.3, 0.0, 0.0], 300, 8);
        for rule in SamplingRule::BAYESIAN {
            let cfg = quick(rule);
            let t = run_experiment(&cfg, &e, 11).unwrap();
            assert!(t.batches[0].allocation.iter().all(|&x| x == 1.0 / 3.0));
            for b in &t.batches[1..] {
                let s: f64 = b.allocation.iter().sum();
                assert!((s - 1.0).abs() < 1e-12);
                assert!(b.allocation.iter().all(|&x| x >= cfg.gamma - 1e-15));
            }
        }
    }

    #[test]
    fn same_seed_same_trajectory() {
        let e = env(&[0.1, 0.0, 0.05], 200, 6);
        let cfg = ExperimentConfig {
            rule: SamplingRule::NbTtts,
            alpha_method: AlphaMethod::MonteCarlo { draws: 2_000 },
            ..Default::default()
        };
        assert_eq!(run_experiment(&cfg, &e, 5).unwrap(), run_experiment(&cfg, &e, 5).unwrap());
    }

    #[test]
    fn allocations_replay_from_history() {
        let e = env(&[0.1, 0.0, 0.05, -0.2], 400, 6);
        let cfg = ExperimentConfig {
            rule: SamplingRule::WbTtts,
            alpha_method: AlphaMethod::MonteCarlo { draws: 2_000 },
            ..Default::default()
        };
        let t = run_experiment(&cfg, &e, 99).unwrap();
        let allocator = Allocator::new(&cfg);
        let mut post = cfg.new_posteriors(&e).unwrap();
        for (i, rec) in t.batches.iter().enumerate() {
            let (alloc, _) = allocator.next_allocation(&post, t.seed).unwrap();
            assert_eq!(alloc.e, rec.allocation, "batch {}", i + 1);
            post.observe(&rec.summaries).unwrap();
        }
    }

    #[test]
    fn dominant_arm_is_found() {
        let e = env(&[10.0, 0.0, 0.0], 500, 20);
        let cfg = quick(SamplingRule::WbTtts);
        let wins = run_monte_carlo_map(&cfg, &e, 100, 1, false, |_, t| t.final_alpha[0] > 0.95).unwrap();
        assert!(wins.iter().filter(|&&w| w).count() >= 99);
    }

    #[test]
    fn single_run_campaign_matches_run_experiment() {
        let e = env(&[0.1, 0.0], 100, 4);
        let cfg = quick(SamplingRule::WbTs);
        let runs = run_monte_carlo(&cfg, &e, 1, 1).unwrap();
        assert_eq!(runs[0], run_experiment(&cfg, &e, substream_seed(cfg.seed, 1)).unwrap());
    }

    #[test]
    fn worker_count_does_not_change_results() {
        let e = env(&[0.1, 0.0, 0.0], 100, 5);
        let cfg = quick(SamplingRule::NbTs);
        let a = run_monte_carlo_map(&cfg, &e, 40, 1, false, |_, t| t.final_alpha).unwrap();
        let b = run_monte_carlo_map(&cfg, &e, 40, 4, false, |_, t| t.final_alpha).unwrap();
        assert_eq!(a, b);
    }

    #[test]
    fn config_validation() {
        let e = env(&[0.0; 10], 100, 2);
        let mut cfg = quick(SamplingRule::NbTs);
        cfg.gamma = 0.1;
        assert!(run_experiment(&cfg, &e, 0).is_err());
        let mut cfg = quick(SamplingRule::NbTs);
        cfg.eta = 0.0;
        assert!(run_experiment(&cfg, &e, 0).is_err());
        let mut cfg = quick(SamplingRule::NbTs);
        cfg.alpha_method = AlphaMethod::MonteCarlo { draws: 10 };
        assert!(run_experiment(&cfg, &e, 0).is_err());
    }
}

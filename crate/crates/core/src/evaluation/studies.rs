//! Packaged simulation studies: estimator bias under adaptive sampling and
//! the distribution of final optimal probabilities of equivalent arms.

use serde::{Deserialize, Serialize};

use crate::allocation::{decide_from_alpha, AlphaMethod, DecisionRule};
use crate::engine::{run_monte_carlo_map, EngineError, ExperimentConfig, SamplingRule, VarianceSetting};
use crate::environment::{ArmSpec, BatchSchedule, SyntheticEnv, Trend};
use crate::evaluation::calibration::beta_marginal_moments;
use crate::posterior::{nb_point_estimate, studentized_z, wb_point_estimate, StatisticScheme, WeightScheme};
use crate::stats::{mean_and_variance, MeanEstimate, Rate, Z95, Z99};
use crate::summary::BatchSummary;

/// Equal-width histogram with explicit out-of-range counts.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub lo: f64,
    pub hi: f64,
    pub counts: Vec<u64>,
    pub below: u64,
    pub above: u64,
}

impl Histogram {
    pub fn new(lo: f64, hi: f64, bins: usize, xs: &[f64]) -> Self {
        assert!(hi > lo && bins > 0);
        let mut h = Self {
            lo,
            hi,
            counts: vec![0; bins],
            below: 0,
            above: 0,
        };
        let width = (hi - lo) / bins as f64;
        for &x in xs {
            if x < lo {
                h.below += 1;
            } else if x >= hi {
                h.above += 1;
            } else {
                let i = (((x - lo) / width) as usize).min(bins - 1);
                h.counts[i] += 1;
            }
        }
        h
    }

    pub fn bin_width(&self) -> f64 {
        (self.hi - self.lo) / self.counts.len() as f64
    }

    pub fn total(&self) -> u64 {
        self.counts.iter().sum::<u64>() + self.below + self.above
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct BiasDemoSettings {
    pub rule: SamplingRule,
    pub runs: u64,
    pub batch_size: u64,
    pub means: Vec<f64>,
    pub noise_sd: f64,
    pub gamma: f64,
    pub eta: f64,
    pub beta: f64,
    pub alpha_method: AlphaMethod,
    pub seed: u64,
}

impl Default for BiasDemoSettings {
    fn default() -> Self {
        Self {
            rule: SamplingRule::NbTs,
            runs: 100_000,
            batch_size: 1000,
            means: vec![0.01, 0.0, 0.0],
            noise_sd: 1.0,
            gamma: 0.01,
            eta: 1.0,
            beta: 0.5,
            alpha_method: AlphaMethod::default(),
            seed: 0,
        }
    }
}

/// Summary of studentized statistics of the best arm.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZSummary {
    pub statistic: StatisticScheme,
    pub estimate: MeanEstimate,
    /// 99% interval for the mean.
    pub ci99_lo: f64,
    pub ci99_hi: f64,
    pub histogram: Histogram,
}

impl ZSummary {
    fn from_samples(statistic: StatisticScheme, zs: &[f64]) -> Self {
        let estimate = MeanEstimate::from_samples(zs, Z95).expect("at least one run");
        let half = Z99 * estimate.std_error();
        Self {
            statistic,
            estimate,
            ci99_lo: estimate.mean - half,
            ci99_hi: estimate.mean + half,
            histogram: Histogram::new(-5.0, 5.0, 40, zs),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BiasDemoResult {
    pub rule: SamplingRule,
    pub runs: u64,
    pub seed: u64,
    pub nb: ZSummary,
    pub wb: ZSummary,
    /// Per-run `(z_nb, z_wb)`.
    pub samples: Vec<(f64, f64)>,
}

/// Studentized NB and WB statistics of arm 1 after two batches: batch 1
/// uniform, batch 2 allocated by `rule`. Reward variances are known.
pub fn bias_demo(settings: &BiasDemoSettings, workers: usize) -> Result<BiasDemoResult, EngineError> {
    if !settings.rule.is_adaptive() {
        return Err(EngineError::Config("the bias demo needs one of the four Bayesian rules".into()));
    }
    let arms = settings
        .means
        .iter()
        .map(|&m| ArmSpec::new(m, settings.noise_sd, Trend::Stationary))
        .collect::<Result<Vec<_>, _>>()?;
    let env = SyntheticEnv::new(arms, BatchSchedule::fixed(settings.batch_size, 2))?;
    let config = ExperimentConfig {
        rule: settings.rule,
        gamma: settings.gamma,
        eta: settings.eta,
        beta: settings.beta,
        variance: VarianceSetting::Known,
        alpha_method: settings.alpha_method,
        seed: settings.seed,
        ..Default::default()
    };
    let sigma_sq = settings.noise_sd * settings.noise_sd;
    let truth = settings.means[0];
    let samples = run_monte_carlo_map(&config, &env, settings.runs, workers, true, |_, t| {
        let history: Vec<BatchSummary> = t.batches.iter().map(|b| b.summaries[0].clone()).collect();
        best_arm_z(&history, sigma_sq, truth)
    })?
    .into_iter()
    .collect::<Result<Vec<_>, _>>()?;
    let nb: Vec<f64> = samples.iter().map(|s| s.0).collect();
    let wb: Vec<f64> = samples.iter().map(|s| s.1).collect();
    Ok(BiasDemoResult {
        rule: settings.rule,
        runs: settings.runs,
        seed: settings.seed,
        nb: ZSummary::from_samples(StatisticScheme::Naive, &nb),
        wb: ZSummary::from_samples(StatisticScheme::Weighted, &wb),
        samples,
    })
}

fn best_arm_z(history: &[BatchSummary], sigma_sq: f64, truth: f64) -> Result<(f64, f64), EngineError> {
    let n: u64 = history.iter().map(|s| s.count).sum();
    let nb = nb_point_estimate(history)?;
    let z_nb = studentized_z(nb, n as f64 / sigma_sq, truth)?;
    let wb = wb_point_estimate(history, WeightScheme::PhiOne, sigma_sq)?;
    let z_wb = studentized_z(wb.estimate, wb.tau, truth)?;
    Ok((z_nb, z_wb))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ConvergenceSettings {
    pub k: usize,
    pub k_prime: u32,
    pub rule: SamplingRule,
    pub eta: f64,
    pub runs: u64,
    pub num_batches: u32,
    pub batch_size: u64,
    /// Arms beyond the first `K′` sit this far below the equivalent best.
    pub inferior_gap: f64,
    pub rho: f64,
    pub alpha_method: AlphaMethod,
    pub seed: u64,
}

impl Default for ConvergenceSettings {
    fn default() -> Self {
        Self {
            k: 3,
            k_prime: 3,
            rule: SamplingRule::Uniform,
            eta: 1.0,
            runs: 10_000,
            num_batches: 20,
            batch_size: 500,
            inferior_gap: 0.5,
            rho: 0.1,
            alpha_method: AlphaMethod::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConvergenceResult {
    pub settings: ConvergenceSettings,
    /// Final `α` of the `K′` equivalent arms, one vector per run.
    pub alphas: Vec<Vec<f64>>,
    pub alpha1_mean: f64,
    pub alpha1_variance: f64,
    pub target_mean: f64,
    pub target_variance: f64,
    pub delta: f64,
    /// Share of runs with `max α > δ` over all arms.
    pub exceedance: Rate,
}

/// Final optimal probabilities when the first `K′` of `K` arms are
/// equivalent best arms.
pub fn convergence_study(settings: &ConvergenceSettings, workers: usize) -> Result<ConvergenceResult, EngineError> {
    let (k, kp) = (settings.k, settings.k_prime as usize);
    if kp < 2 || kp > k {
        return Err(EngineError::Config(format!("need 2 <= K' <= K, got K'={kp}, K={k}")));
    }
    let arms = (0..k)
        .map(|i| {
            let mean = if i < kp { 0.0 } else { -settings.inferior_gap };
            ArmSpec::new(mean, 1.0, Trend::Stationary)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let env = SyntheticEnv::new(arms, BatchSchedule::fixed(settings.batch_size, settings.num_batches))?;
    let decision = DecisionRule::from_fpr(settings.rho, settings.k_prime)?;
    let config = ExperimentConfig {
        rule: settings.rule,
        eta: settings.eta,
        decision,
        alpha_method: settings.alpha_method,
        seed: settings.seed,
        ..Default::default()
    };
    let finals = run_monte_carlo_map(&config, &env, settings.runs, workers, false, |_, t| t.final_alpha)?;
    let a1: Vec<f64> = finals.iter().map(|a| a[0]).collect();
    let (alpha1_mean, alpha1_variance) = mean_and_variance(&a1).expect("at least one run");
    let (target_mean, target_variance) = beta_marginal_moments(settings.k_prime);
    let exceed = finals
        .iter()
        .filter(|a| decide_from_alpha(a, decision.delta).is_some())
        .count() as u64;
    Ok(ConvergenceResult {
        settings: settings.clone(),
        alphas: finals.into_iter().map(|mut a| {
            a.truncate(kp);
            a
        }).collect(),
        alpha1_mean,
        alpha1_variance,
        target_mean,
        target_variance,
        delta: decision.delta,
        exceedance: Rate::wilson(exceed, settings.runs, Z95),
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn histogram_counts_everything() {
        let h = Histogram::new(-1.0, 1.0, 4, &[-2.0, -1.0, -0.6, 0.0, 0.49, 0.5, 1.0, 3.0]);
        assert_eq!(h.counts, vec![2, 0, 2, 1]);
        assert_eq!((h.below, h.above), (1, 2));
        assert_eq!(h.total(), 8);
        assert_eq!(h.bin_width(), 0.5);
    }

    #[test]
    fn exact_rewards_give_zero_z() {
        let history = [
            BatchSummary::from_rewards(1, 0, &[0.01; 300], 900, 1.0 / 3.0),
            BatchSummary::from_rewards(2, 0, &[0.01; 40], 900, 0.05),
        ];
        let (nb, wb) = best_arm_z(&history, 1.0, 0.01).unwrap();
        assert!(nb.abs() < 1e-12 && wb.abs() < 1e-12);
    }

    #[test]
    fn uniform_is_rejected_for_bias_demo() {
        let s = BiasDemoSettings {
            rule: SamplingRule::Uniform,
            runs: 1,
            ..Default::default()
        };
        assert!(bias_demo(&s, 1).is_err());
    }

    #[test]
    fn symmetric_convergence_mean() {
        let s = ConvergenceSettings {
            k: 2,
            k_prime: 2,
            runs: 2000,
            num_batches: 2,
            batch_size: 200,
            alpha_method: AlphaMethod::Quadrature,
            seed: 1,
            ..Default::default()
        };
        let r = convergence_study(&s, 1).unwrap();
        assert_eq!(r.alphas.len(), 2000);
        assert!((r.alpha1_mean - 0.5).abs() < 0.03);
        assert!((r.delta - 0.95).abs() < 1e-12);
    }
}

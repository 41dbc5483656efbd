//! Neutral posterior reshaping.
//!
//! With `K′` equivalent best arms sampled uniformly, the final optimal
//! probability of any one of them should be distributed like the marginal of
//! a flat Dirichlet, `Beta(1, K′−1)`. The neutral `η` is the grid value whose
//! reshaped posteriors bring the mean and variance of `α₁` closest to it.

use serde::{Deserialize, Serialize};

use crate::allocation::{decide_from_alpha, threshold_for_fpr, AlphaMethod};
use crate::engine::{run_monte_carlo_map, stream_rng, EngineError, ExperimentConfig, SamplingRule, VarianceSetting};
use crate::environment::{ArmSpec, BatchSchedule, SyntheticEnv, Trend};
use crate::stats::{mean_and_variance, Rate, Z95};

/// `η ∈ {0.40, 0.45, …, 1.20}`.
pub fn default_eta_grid() -> Vec<f64> {
    (0..=16).map(|i| (40 + 5 * i) as f64 / 100.0).collect()
}

/// Mean and variance of `Beta(1, K′−1)`.
pub fn beta_marginal_moments(k_prime: u32) -> (f64, f64) {
    let k = k_prime as f64;
    (1.0 / k, (k - 1.0) / (k * k * (k + 1.0)))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct CalibrationSettings {
    pub k_prime: u32,
    pub grid: Vec<f64>,
    pub runs: u64,
    pub samples_per_arm: u64,
    pub num_batches: u32,
    /// Nominal FPR used to report the exceedance rate at each grid point.
    pub rho: f64,
    pub variance: VarianceSetting,
    pub alpha_method: AlphaMethod,
    pub seed: u64,
}

impl Default for CalibrationSettings {
    fn default() -> Self {
        Self {
            k_prime: 3,
            grid: default_eta_grid(),
            runs: 10_000,
            samples_per_arm: 10_000,
            num_batches: 20,
            rho: 0.1,
            variance: VarianceSetting::Estimated,
            alpha_method: AlphaMethod::default(),
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationPoint {
    pub eta: f64,
    pub alpha1_mean: f64,
    pub alpha1_variance: f64,
    /// Squared distance of (mean, variance) to the target moments.
    pub distance: f64,
    /// Share of runs with `max α > δ` at the nominal FPR.
    pub fpr: Rate,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub k_prime: u32,
    pub target_mean: f64,
    pub target_variance: f64,
    pub delta: f64,
    pub runs: u64,
    pub seed: u64,
    pub eta_star: f64,
    pub curve: Vec<CalibrationPoint>,
}

/// Final optimal-probability vectors of `K′` equivalent arms under uniform
/// sampling, one per run and grid value: `out[run][grid index]`.
///
/// Each run is simulated once; every `η` is applied to the same final
/// posteriors with the same random stream.
pub fn neutral_alpha_samples(
    settings: &CalibrationSettings,
    etas: &[f64],
    workers: usize,
) -> Result<Vec<Vec<Vec<f64>>>, EngineError> {
    let k = settings.k_prime as usize;
    if settings.k_prime < 2 {
        return Err(EngineError::Config("K' must be at least 2".into()));
    }
    if etas.is_empty() {
        return Err(EngineError::Config("empty eta grid".into()));
    }
    if let Some(eta) = etas.iter().find(|e| !(**e > 0.0 && **e <= 2.0)) {
        return Err(EngineError::Config(format!("grid values must lie in (0, 2], got {eta}")));
    }
    if settings.num_batches == 0 || settings.samples_per_arm == 0 {
        return Err(EngineError::Config("need at least one batch and one sample per arm".into()));
    }
    let total = settings.samples_per_arm * k as u64;
    let lambda = total.div_ceil(settings.num_batches as u64).max(k as u64);
    let arms = vec![ArmSpec::new(0.0, 1.0, Trend::Stationary).map_err(EngineError::from)?; k];
    let env = SyntheticEnv::new(arms, BatchSchedule::fixed(lambda, settings.num_batches))?;
    let config = ExperimentConfig {
        rule: SamplingRule::Uniform,
        eta: etas[0],
        variance: settings.variance,
        alpha_method: settings.alpha_method,
        seed: settings.seed,
        ..Default::default()
    };
    let results = run_monte_carlo_map(&config, &env, settings.runs, workers, false, |_, t| {
        etas.iter()
            .map(|&eta| {
                let mut rng = stream_rng(t.seed, settings.num_batches as u64 + 1);
                settings
                    .alpha_method
                    .compute(&t.final_posteriors, eta, &mut rng)
                    .map(|a| a.alpha)
            })
            .collect::<Result<Vec<_>, _>>()
    })?;
    results.into_iter().map(|r| r.map_err(EngineError::from)).collect()
}

/// Grid search for the neutral `η`. Ties go to the smaller `η`.
pub fn calibrate_neutral_eta(settings: &CalibrationSettings, workers: usize) -> Result<CalibrationResult, EngineError> {
    let samples = neutral_alpha_samples(settings, &settings.grid, workers)?;
    let (target_mean, target_variance) = beta_marginal_moments(settings.k_prime);
    let delta = threshold_for_fpr(settings.rho, settings.k_prime)?;
    let mut curve = Vec::with_capacity(settings.grid.len());
    for (g, &eta) in settings.grid.iter().enumerate() {
        let a1: Vec<f64> = samples.iter().map(|run| run[g][0]).collect();
        let (mean, variance) = mean_and_variance(&a1).expect("at least one run");
        let claims = samples
            .iter()
            .filter(|run| decide_from_alpha(&run[g], delta).is_some())
            .count() as u64;
        curve.push(CalibrationPoint {
            eta,
            alpha1_mean: mean,
            alpha1_variance: variance,
            distance: (mean - target_mean).powi(2) + (variance - target_variance).powi(2),
            fpr: Rate::wilson(claims, samples.len() as u64, Z95),
        });
    }
    let eta_star = curve
        .iter()
        .fold(None::<&CalibrationPoint>, |best, p| match best {
            Some(b) if b.distance <= p.distance => Some(b),
            _ => Some(p),
        })
        .map(|p| p.eta)
        .expect("non-empty grid");
    Ok(CalibrationResult {
        k_prime: settings.k_prime,
        target_mean,
        target_variance,
        delta,
        runs: settings.runs,
        seed: settings.seed,
        eta_star,
        curve,
    })
}

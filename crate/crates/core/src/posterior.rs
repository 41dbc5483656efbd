//! Gaussian posteriors over arm means, built from batch summaries.
//!
//! Two likelihood schemes are supported:
//!
//! * **Naive batch (NB)** treats every batch mean as an independent Gaussian
//!   observation with precision `n / σ²`. The cumulative posterior is the
//!   precision-weighted mean of all batch means. Under outcome-adaptive
//!   sampling the batch sizes depend on earlier rewards, and the resulting
//!   estimator is biased downward.
//! * **Weighted batch (WB)** combines batch means with weights
//!   `w_i = φ_i √n_i / Σ φ_j √n_j`, where `φ_i` is either 1 or `√T_i`. The
//!   weighted statistic stays asymptotically normal and unbiased under
//!   adaptive allocation. Its precision is `(Σ φ√n)² / (σ² Σ φ²)`.
//!
//! All functions here are pure. The improper prior (`τ₀ = 0`) is the default;
//! an arm with no data under that prior is reported as *uninformed*
//! (`tau == 0`) rather than as an error.
//!
//! The sample-variance estimator `ΣSS/Σn − θ̂²` is plugged in with the same
//! point estimate as the posterior scheme. Whether it inherits the NB bias
//! under adaptive sampling is not characterized.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::summary::{validate_batch, BatchSummary};

/// Lower bound applied to estimated reward variances.
pub const DEFAULT_VARIANCE_FLOOR: f64 = 1e-12;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PosteriorError {
    #[error("invalid input: {0}")]
    InvalidInput(String),
    #[error("arm has no data under an improper prior")]
    Uninformed,
    #[error("need at least 2 samples to estimate a variance, have {samples}")]
    InsufficientData { samples: u64 },
}

/// Normal posterior `N(mu, 1/tau)` over one arm's mean reward.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianPosterior {
    pub mu: f64,
    pub tau: f64,
}

impl Default for GaussianPosterior {
    fn default() -> Self {
        Self::IMPROPER
    }
}

impl GaussianPosterior {
    /// Flat prior: `τ₀ = 0`, `μ₀ = 0`.
    pub const IMPROPER: Self = Self { mu: 0.0, tau: 0.0 };

    pub fn new(mu: f64, tau: f64) -> Result<Self, PosteriorError> {
        if !mu.is_finite() || !tau.is_finite() || tau < 0.0 {
            return Err(PosteriorError::InvalidInput(format!(
                "posterior requires finite mu and tau >= 0, got ({mu}, {tau})"
            )));
        }
        Ok(Self { mu, tau })
    }

    /// `false` for the improper prior state, where `mu` carries no meaning.
    pub fn is_informed(&self) -> bool {
        self.tau > 0.0
    }

    pub fn variance(&self) -> f64 {
        1.0 / self.tau
    }

    pub fn sd(&self) -> f64 {
        self.tau.recip().sqrt()
    }

    /// See [`reshape_posterior`].
    pub fn reshape(self, eta: f64) -> Result<Self, PosteriorError> {
        reshape_posterior(self, eta)
    }
}

/// Batch weight `φ` used by the weighted-batch scheme.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum WeightScheme {
    /// `φ = 1`
    #[default]
    PhiOne,
    /// `φ = √T`, with `T` the batch's total sample size
    PhiSqrtT,
}

impl WeightScheme {
    fn phi(self, s: &BatchSummary) -> f64 {
        match self {
            WeightScheme::PhiOne => 1.0,
            WeightScheme::PhiSqrtT => (s.batch_total as f64).sqrt(),
        }
    }
}

/// Which likelihood a posterior is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StatisticScheme {
    Naive,
    Weighted,
}

fn check_prior(prior: &GaussianPosterior) -> Result<(), PosteriorError> {
    GaussianPosterior::new(prior.mu, prior.tau).map(|_| ())
}

fn check_sigma_sq(sigma_sq: f64) -> Result<(), PosteriorError> {
    if !sigma_sq.is_finite() || sigma_sq <= 0.0 {
        return Err(PosteriorError::InvalidInput(format!(
            "reward variance must be finite and positive, got {sigma_sq}"
        )));
    }
    Ok(())
}

fn check_history(history: &[BatchSummary]) -> Result<(), PosteriorError> {
    for s in history {
        if !s.mean.is_finite() || !s.sum_sq.is_finite() {
            return Err(PosteriorError::InvalidInput(format!(
                "non-finite statistics in batch {}",
                s.batch
            )));
        }
    }
    Ok(())
}

fn total_count(history: &[BatchSummary]) -> u64 {
    history.iter().map(|s| s.count).sum()
}

/// Cumulative naive-batch update:
/// `τ = τ₀ + Σn/σ²`, `μ = (μ₀τ₀ + Σ nȲ/σ²) / τ`.
///
/// With an improper prior and no samples the result has `tau == 0`.
pub fn nb_update(
    prior: GaussianPosterior,
    history: &[BatchSummary],
    sigma_sq: f64,
) -> Result<GaussianPosterior, PosteriorError> {
    check_prior(&prior)?;
    check_sigma_sq(sigma_sq)?;
    check_history(history)?;
    let (mut n, mut weighted) = (0.0, 0.0);
    for s in history.iter().filter(|s| s.count > 0) {
        n += s.count as f64;
        weighted += s.count as f64 * s.mean;
    }
    let data_tau = n / sigma_sq;
    let tau = prior.tau + data_tau;
    if tau == 0.0 {
        return Ok(prior);
    }
    let mu = (prior.mu * prior.tau + weighted / sigma_sq) / tau;
    GaussianPosterior::new(mu, tau)
}

/// Sums over non-empty batches: `(Σ φ√n, Σ φ², Σ φ√n·Ȳ)`.
fn weighted_sums(history: &[BatchSummary], weight: WeightScheme) -> (f64, f64, f64) {
    let mut lin = 0.0;
    let mut sq = 0.0;
    let mut acc = 0.0;
    for s in history.iter().filter(|s| s.count > 0) {
        let phi = weight.phi(s);
        let h = phi * (s.count as f64).sqrt();
        lin += h;
        sq += phi * phi;
        acc += h * s.mean;
    }
    (lin, sq, acc)
}

/// Weighted-batch update. Batches where the arm received no samples drop
/// out of every sum.
pub fn wb_update(
    prior: GaussianPosterior,
    history: &[BatchSummary],
    sigma_sq: f64,
    weight: WeightScheme,
) -> Result<GaussianPosterior, PosteriorError> {
    check_prior(&prior)?;
    check_sigma_sq(sigma_sq)?;
    check_history(history)?;
    let (lin, sq, acc) = weighted_sums(history, weight);
    if lin == 0.0 {
        return Ok(prior);
    }
    let estimate = acc / lin;
    let data_tau = lin * lin / (sq * sigma_sq);
    let tau = prior.tau + data_tau;
    let mu = (prior.mu * prior.tau + data_tau * estimate) / tau;
    GaussianPosterior::new(mu, tau)
}

/// Naive-batch point estimate `Σ nȲ / Σ n`.
pub fn nb_point_estimate(history: &[BatchSummary]) -> Result<f64, PosteriorError> {
    check_history(history)?;
    let n = total_count(history);
    if n == 0 {
        return Err(PosteriorError::Uninformed);
    }
    let weighted: f64 = history
        .iter()
        .filter(|s| s.count > 0)
        .map(|s| s.count as f64 * s.mean)
        .sum();
    Ok(weighted / n as f64)
}

/// Weighted-batch point estimate `Σ wȲ` alone; does not need a variance.
pub fn wb_estimate(history: &[BatchSummary], weight: WeightScheme) -> Result<f64, PosteriorError> {
    check_history(history)?;
    let (lin, _, acc) = weighted_sums(history, weight);
    if lin == 0.0 {
        return Err(PosteriorError::Uninformed);
    }
    Ok(acc / lin)
}

/// Weighted-batch estimate together with its precision.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct WeightedEstimate {
    pub estimate: f64,
    pub tau: f64,
}

/// Weighted-batch point estimate with `τ⁻¹ = Σ w²σ²/n`, computed from the
/// explicit weight vector.
pub fn wb_point_estimate(
    history: &[BatchSummary],
    weight: WeightScheme,
    sigma_sq: f64,
) -> Result<WeightedEstimate, PosteriorError> {
    check_sigma_sq(sigma_sq)?;
    check_history(history)?;
    let (lin, _, _) = weighted_sums(history, weight);
    if lin == 0.0 {
        return Err(PosteriorError::Uninformed);
    }
    let mut estimate = 0.0;
    let mut inv_tau = 0.0;
    for s in history.iter().filter(|s| s.count > 0) {
        let n = s.count as f64;
        let w = weight.phi(s) * n.sqrt() / lin;
        estimate += w * s.mean;
        inv_tau += w * w * sigma_sq / n;
    }
    Ok(WeightedEstimate {
        estimate,
        tau: inv_tau.recip(),
    })
}

/// Plug-in reward variance `ΣSS/Σn − θ̂²`, with `θ̂` taken from the given
/// scheme, floored at `floor`.
pub fn estimate_sample_variance(
    history: &[BatchSummary],
    scheme: StatisticScheme,
    weight: WeightScheme,
    floor: f64,
) -> Result<f64, PosteriorError> {
    check_history(history)?;
    if !(floor > 0.0) {
        return Err(PosteriorError::InvalidInput(format!(
            "variance floor must be positive, got {floor}"
        )));
    }
    let n = total_count(history);
    if n < 2 {
        return Err(PosteriorError::InsufficientData { samples: n });
    }
    let ss: f64 = history.iter().map(|s| s.sum_sq).sum();
    let theta = match scheme {
        StatisticScheme::Naive => nb_point_estimate(history)?,
        StatisticScheme::Weighted => wb_estimate(history, weight)?,
    };
    Ok((ss / n as f64 - theta * theta).max(floor))
}

/// Scales the precision by `eta`, leaving the mean alone. `eta < 1` widens
/// the posterior (more exploration), `eta > 1` sharpens it.
pub fn reshape_posterior(
    p: GaussianPosterior,
    eta: f64,
) -> Result<GaussianPosterior, PosteriorError> {
    if !eta.is_finite() || eta <= 0.0 {
        return Err(PosteriorError::InvalidInput(format!(
            "reshaping parameter must be positive, got {eta}"
        )));
    }
    if !p.is_informed() {
        return Err(PosteriorError::Uninformed);
    }
    GaussianPosterior::new(p.mu, p.tau * eta)
}

/// `√τ · (estimate − true_mean)`.
pub fn studentized_z(estimate: f64, tau: f64, true_mean: f64) -> Result<f64, PosteriorError> {
    if !estimate.is_finite() || !true_mean.is_finite() || !tau.is_finite() || tau <= 0.0 {
        return Err(PosteriorError::InvalidInput(format!(
            "studentized statistic needs finite inputs and tau > 0, got tau={tau}"
        )));
    }
    Ok(tau.sqrt() * (estimate - true_mean))
}

/// How reward variances are obtained when updating posteriors.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum VarianceMode {
    /// One known variance per arm.
    Known(Vec<f64>),
    /// Re-estimated after each batch from all data so far; `fallback` is used
    /// until an arm has at least two samples.
    Estimated { fallback: f64, floor: f64 },
}

impl VarianceMode {
    pub fn estimated() -> Self {
        VarianceMode::Estimated {
            fallback: 1.0,
            floor: DEFAULT_VARIANCE_FLOOR,
        }
    }
}

/// Posteriors for all arms of one experiment, plus the batch history they are
/// derived from.
///
/// Every [`observe`](Self::observe) appends one batch and recomputes each arm's
/// posterior from its full history with the configured scheme.
#[derive(Debug, Clone)]
pub struct PosteriorSet {
    prior: Vec<GaussianPosterior>,
    posteriors: Vec<GaussianPosterior>,
    sigma_sq: Vec<f64>,
    history: Vec<Vec<BatchSummary>>,
    variance: VarianceMode,
    statistic: StatisticScheme,
    weight: WeightScheme,
}

impl PosteriorSet {
    pub fn new(
        num_arms: usize,
        variance: VarianceMode,
        statistic: StatisticScheme,
        weight: WeightScheme,
    ) -> Result<Self, PosteriorError> {
        Self::with_prior(
            vec![GaussianPosterior::IMPROPER; num_arms],
            variance,
            statistic,
            weight,
        )
    }

    pub fn with_prior(
        prior: Vec<GaussianPosterior>,
        variance: VarianceMode,
        statistic: StatisticScheme,
        weight: WeightScheme,
    ) -> Result<Self, PosteriorError> {
        let k = prior.len();
        if k == 0 {
            return Err(PosteriorError::InvalidInput("need at least one arm".into()));
        }
        for p in &prior {
            check_prior(p)?;
        }
        let sigma_sq = match &variance {
            VarianceMode::Known(v) => {
                if v.len() != k {
                    return Err(PosteriorError::InvalidInput(format!(
                        "{} known variances for {k} arms",
                        v.len()
                    )));
                }
                for &s in v {
                    check_sigma_sq(s)?;
                }
                v.clone()
            }
            VarianceMode::Estimated { fallback, floor } => {
                check_sigma_sq(*fallback)?;
                if !(*floor > 0.0) {
                    return Err(PosteriorError::InvalidInput("variance floor must be positive".into()));
                }
                vec![*fallback; k]
            }
        };
        Ok(Self {
            posteriors: prior.clone(),
            prior,
            sigma_sq,
            history: vec![Vec::new(); k],
            variance,
            statistic,
            weight,
        })
    }

    pub fn num_arms(&self) -> usize {
        self.posteriors.len()
    }

    pub fn num_batches(&self) -> usize {
        self.history[0].len()
    }

    pub fn posteriors(&self) -> &[GaussianPosterior] {
        &self.posteriors
    }

    pub fn history(&self, arm: usize) -> &[BatchSummary] {
        &self.history[arm]
    }

    /// Variance currently used for `arm`.
    pub fn sigma_sq(&self, arm: usize) -> f64 {
        self.sigma_sq[arm]
    }

    pub fn statistic(&self) -> StatisticScheme {
        self.statistic
    }

    pub fn all_informed(&self) -> bool {
        self.posteriors.iter().all(GaussianPosterior::is_informed)
    }

    pub fn total_counts(&self) -> Vec<u64> {
        self.history.iter().map(|h| total_count(h)).collect()
    }

    /// Point estimate of one arm under this set's scheme.
    pub fn point_estimate(&self, arm: usize) -> Result<f64, PosteriorError> {
        match self.statistic {
            StatisticScheme::Naive => nb_point_estimate(&self.history[arm]),
            StatisticScheme::Weighted => wb_estimate(&self.history[arm], self.weight),
        }
    }

    /// Appends one complete batch (one summary per arm, in arm order) and
    /// recomputes every posterior.
    pub fn observe(&mut self, batch: &[BatchSummary]) -> Result<(), PosteriorError> {
        validate_batch(batch, self.num_arms())?;
        let expected = self.num_batches() as u32 + 1;
        if batch[0].batch != expected {
            return Err(PosteriorError::InvalidInput(format!(
                "expected batch {expected}, got {}",
                batch[0].batch
            )));
        }
        for (k, s) in batch.iter().enumerate() {
            self.history[k].push(s.clone());
        }
        for k in 0..self.num_arms() {
            self.refresh(k)?;
        }
        Ok(())
    }

    fn refresh(&mut self, arm: usize) -> Result<(), PosteriorError> {
        let history = &self.history[arm];
        if let VarianceMode::Estimated { fallback, floor } = self.variance {
            self.sigma_sq[arm] = if total_count(history) >= 2 {
                estimate_sample_variance(history, self.statistic, self.weight, floor)?
            } else {
                fallback
            };
        }
        let sigma_sq = self.sigma_sq[arm];
        let prior = self.prior[arm];
        self.posteriors[arm] = match self.statistic {
            StatisticScheme::Naive => nb_update(prior, history, sigma_sq)?,
            StatisticScheme::Weighted => wb_update(prior, history, sigma_sq, self.weight)?,
        };
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn batch(b: u32, n: u64, mean: f64) -> BatchSummary {
        // sum_sq consistent with unit within-batch variance
        let sum = n as f64 * mean;
        let ss = n as f64 * (mean * mean + 1.0);
        BatchSummary::from_sums(b, 0, n, sum, ss, n.max(1), 1.0)
    }

    fn batch_t(b: u32, n: u64, mean: f64, total: u64) -> BatchSummary {
        let mut s = batch(b, n, mean);
        s.batch_total = total;
        s
    }

    const P0: GaussianPosterior = GaussianPosterior::IMPROPER;

    #[test]
    fn nb_single_batch() {
        let p = nb_update(P0, &[batch(1, 100, 0.5)], 1.0).unwrap();
        assert!((p.mu - 0.5).abs() < 1e-12);
        assert!((p.tau - 100.0).abs() < 1e-12);
    }

    #[test]
    fn nb_precision_weighted_mean() {
        let p = nb_update(P0, &[batch(1, 100, 0.2), batch(2, 400, 0.6)], 1.0).unwrap();
        assert!((p.mu - 0.52).abs() < 1e-12);
        assert!((p.tau - 500.0).abs() < 1e-12);
    }

    #[test]
    fn nb_symmetric_average_with_sigma_two() {
        let p = nb_update(P0, &[batch(1, 100, 0.4), batch(2, 100, 0.6)], 2.0).unwrap();
        assert!((p.mu - 0.5).abs() < 1e-12);
        assert!((p.tau - 100.0).abs() < 1e-12);
    }

    #[test]
    fn nb_no_data_is_uninformed() {
        let p = nb_update(P0, &[batch(1, 0, 0.0)], 1.0).unwrap();
        assert!(!p.is_informed());
    }

    #[test]
    fn nb_with_proper_prior() {
        let prior = GaussianPosterior::new(1.0, 50.0).unwrap();
        let p = nb_update(prior, &[batch(1, 50, 0.0)], 1.0).unwrap();
        assert!((p.mu - 0.5).abs() < 1e-12);
        assert!((p.tau - 100.0).abs() < 1e-12);
    }

    #[test]
    fn nb_rejects_bad_variance_and_nan() {
        assert!(nb_update(P0, &[batch(1, 10, 0.0)], 0.0).is_err());
        let mut bad = batch(1, 10, 0.0);
        bad.mean = f64::NAN;
        assert!(matches!(
            nb_update(P0, &[bad], 1.0),
            Err(PosteriorError::InvalidInput(_))
        ));
    }

    #[test]
    fn wb_single_batch_matches_nb() {
        let h = [batch(1, 100, 0.5)];
        let wb = wb_update(P0, &h, 1.0, WeightScheme::PhiOne).unwrap();
        let nb = nb_update(P0, &h, 1.0).unwrap();
        assert!((wb.mu - 0.5).abs() < 1e-12 && (wb.tau - 100.0).abs() < 1e-12);
        assert!((wb.mu - nb.mu).abs() < 1e-12 && (wb.tau - nb.tau).abs() < 1e-12);
    }

    #[test]
    fn wb_two_unequal_batches() {
        // w = (10, 20) / 30, tau = (10 + 20)^2 / 2
        let h = [batch(1, 100, 0.2), batch(2, 400, 0.6)];
        let p = wb_update(P0, &h, 1.0, WeightScheme::PhiOne).unwrap();
        assert!((p.mu - 0.2 / 3.0 - 0.4).abs() < 1e-12);
        assert!((p.mu - 0.466_666_666_666_666_7).abs() < 1e-12);
        assert!((p.tau - 450.0).abs() < 1e-9);
    }

    #[test]
    fn wb_constant_phi_cancels() {
        let h = [batch_t(1, 80, 0.3, 500), batch_t(2, 80, 0.7, 500)];
        let a = wb_update(P0, &h, 1.0, WeightScheme::PhiOne).unwrap();
        let b = wb_update(P0, &h, 1.0, WeightScheme::PhiSqrtT).unwrap();
        assert!((a.mu - b.mu).abs() < 1e-12);
        assert!((a.tau - b.tau).abs() < 1e-9);
    }

    #[test]
    fn wb_drops_empty_batches() {
        let with_gap = [batch(1, 100, 0.2), batch(2, 0, 0.0), batch(3, 400, 0.6)];
        let without = [batch(1, 100, 0.2), batch(3, 400, 0.6)];
        let a = wb_update(P0, &with_gap, 1.0, WeightScheme::PhiOne).unwrap();
        let b = wb_update(P0, &without, 1.0, WeightScheme::PhiOne).unwrap();
        assert_eq!(a, b);
        assert!(!wb_update(P0, &[batch(1, 0, 0.0)], 1.0, WeightScheme::PhiOne)
            .unwrap()
            .is_informed());
    }

    #[test]
    fn point_estimates() {
        let one = [batch(1, 37, 0.25)];
        assert!((nb_point_estimate(&one).unwrap() - 0.25).abs() < 1e-12);
        assert!((wb_estimate(&one, WeightScheme::PhiOne).unwrap() - 0.25).abs() < 1e-12);

        let eq = [batch(1, 50, 0.4), batch(2, 50, 0.6)];
        assert!((nb_point_estimate(&eq).unwrap() - 0.5).abs() < 1e-12);
        assert!((wb_estimate(&eq, WeightScheme::PhiOne).unwrap() - 0.5).abs() < 1e-12);

        let uneq = [batch(1, 100, 0.2), batch(2, 400, 0.6)];
        assert!((nb_point_estimate(&uneq).unwrap() - 0.52).abs() < 1e-12);
        let wb = wb_point_estimate(&uneq, WeightScheme::PhiOne, 1.0).unwrap();
        assert!((wb.estimate - 0.466_666_666_666_666_7).abs() < 1e-12);
        assert!((wb.tau - 450.0).abs() < 1e-9);

        assert_eq!(nb_point_estimate(&[]), Err(PosteriorError::Uninformed));
        assert_eq!(
            wb_point_estimate(&[batch(1, 0, 0.0)], WeightScheme::PhiOne, 1.0),
            Err(PosteriorError::Uninformed)
        );
    }

    #[test]
    fn sample_variance_examples() {
        let s = BatchSummary::from_rewards(1, 0, &[0.0, 1.0, 1.0, 0.0], 4, 1.0);
        let v = estimate_sample_variance(&[s], StatisticScheme::Naive, WeightScheme::PhiOne, 1e-12)
            .unwrap();
        assert!((v - 0.25).abs() < 1e-12);

        let c = BatchSummary::from_rewards(1, 0, &[3.5; 10], 10, 1.0);
        let v = estimate_sample_variance(&[c], StatisticScheme::Weighted, WeightScheme::PhiOne, 1e-12)
            .unwrap();
        assert_eq!(v, 1e-12);

        let single = BatchSummary::from_rewards(1, 0, &[1.0], 1, 1.0);
        assert_eq!(
            estimate_sample_variance(&[single], StatisticScheme::Naive, WeightScheme::PhiOne, 1e-12),
            Err(PosteriorError::InsufficientData { samples: 1 })
        );
    }

    #[test]
    fn reshape_examples() {
        let p = GaussianPosterior::new(0.3, 100.0).unwrap();
        assert_eq!(reshape_posterior(p, 1.0).unwrap(), p);
        let r = reshape_posterior(p, 0.7).unwrap();
        assert_eq!(r.mu, 0.3);
        assert!((r.tau - 70.0).abs() < 1e-12);
        let q = GaussianPosterior::new(0.0, 25.0).unwrap();
        assert!((reshape_posterior(q, 4.0).unwrap().variance() - 0.01).abs() < 1e-15);
        assert!(reshape_posterior(p, 0.0).is_err());
        assert!(reshape_posterior(p, -1.0).is_err());
        assert_eq!(reshape_posterior(P0, 1.0), Err(PosteriorError::Uninformed));
    }

    #[test]
    fn studentized_examples() {
        assert_eq!(studentized_z(0.3, 100.0, 0.3).unwrap(), 0.0);
        assert!((studentized_z(0.6, 100.0, 0.5).unwrap() - 1.0).abs() < 1e-12);
        assert!((studentized_z(0.45, 400.0, 0.5).unwrap() + 1.0).abs() < 1e-12);
        assert!(studentized_z(0.0, 0.0, 0.0).is_err());
        assert!(studentized_z(f64::NAN, 1.0, 0.0).is_err());
    }

    #[test]
    fn posterior_set_recomputes_from_history() {
        let mut set = PosteriorSet::new(
            2,
            VarianceMode::Known(vec![1.0, 1.0]),
            StatisticScheme::Weighted,
            WeightScheme::PhiOne,
        )
        .unwrap();
        assert!(!set.all_informed());
        let b1 = [
            BatchSummary::from_sums(1, 0, 100, 20.0, 120.0, 500, 0.5),
            BatchSummary::from_sums(1, 1, 400, 240.0, 544.0, 500, 0.5),
        ];
        set.observe(&b1).unwrap();
        assert!(set.all_informed());
        assert!((set.posteriors()[0].tau - 100.0).abs() < 1e-12);
        let b2 = [
            BatchSummary::from_sums(2, 0, 400, 240.0, 544.0, 500, 0.5),
            BatchSummary::from_sums(2, 1, 100, 20.0, 120.0, 500, 0.5),
        ];
        set.observe(&b2).unwrap();
        let p = set.posteriors()[0];
        assert!((p.mu - 0.466_666_666_666_666_7).abs() < 1e-12);
        assert!((p.tau - 450.0).abs() < 1e-9);
        assert_eq!(set.total_counts(), vec![500, 500]);
        // out-of-order batch
        assert!(set.observe(&b1).is_err());
    }

    #[test]
    fn estimated_variance_falls_back_until_two_samples() {
        let mut set = PosteriorSet::new(
            2,
            VarianceMode::estimated(),
            StatisticScheme::Naive,
            WeightScheme::PhiOne,
        )
        .unwrap();
        let b1 = [
            BatchSummary::from_rewards(1, 0, &[2.0], 5, 0.5),
            BatchSummary::from_rewards(1, 1, &[0.0, 1.0, 1.0, 0.0], 5, 0.5),
        ];
        set.observe(&b1).unwrap();
        assert_eq!(set.sigma_sq(0), 1.0);
        assert!((set.sigma_sq(1) - 0.25).abs() < 1e-12);
        assert!((set.posteriors()[1].tau - 16.0).abs() < 1e-9);
    }
}

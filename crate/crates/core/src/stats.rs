//! Small numeric helpers shared across modules.

use serde::{Deserialize, Serialize};

/// Two-sided 95% standard normal quantile.
pub const Z95: f64 = 1.959_963_984_540_054;
/// Two-sided 99% standard normal quantile.
pub const Z99: f64 = 2.575_829_303_548_900_4;

/// Standard normal CDF.
pub fn normal_cdf(z: f64) -> f64 {
    0.5 * libm::erfc(-z * std::f64::consts::FRAC_1_SQRT_2)
}

/// Standard normal density.
pub fn normal_pdf(z: f64) -> f64 {
    const INV_SQRT_2PI: f64 = 0.398_942_280_401_432_7;
    INV_SQRT_2PI * (-0.5 * z * z).exp()
}

/// A proportion with its Wilson score interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Rate {
    pub successes: u64,
    pub trials: u64,
    pub value: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl Rate {
    /// Wilson score interval at the two-sided level implied by `z`.
    /// `trials` must be positive.
    pub fn wilson(successes: u64, trials: u64, z: f64) -> Self {
        assert!(trials > 0 && successes <= trials);
        let n = trials as f64;
        let p = successes as f64 / n;
        let z2 = z * z;
        let denom = 1.0 + z2 / n;
        let centre = (p + z2 / (2.0 * n)) / denom;
        let half = z * (p * (1.0 - p) / n + z2 / (4.0 * n * n)).sqrt() / denom;
        Self {
            successes,
            trials,
            value: p,
            ci_lo: (centre - half).max(0.0),
            ci_hi: (centre + half).min(1.0),
        }
    }
}

/// Sample mean with a normal-approximation confidence interval.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MeanEstimate {
    pub n: u64,
    pub mean: f64,
    pub sd: f64,
    pub ci_lo: f64,
    pub ci_hi: f64,
}

impl MeanEstimate {
    pub fn from_samples(xs: &[f64], z: f64) -> Option<Self> {
        let (mean, var) = mean_and_variance(xs)?;
        let sd = var.sqrt();
        let se = sd / (xs.len() as f64).sqrt();
        Some(Self {
            n: xs.len() as u64,
            mean,
            sd,
            ci_lo: mean - z * se,
            ci_hi: mean + z * se,
        })
    }

    pub fn std_error(&self) -> f64 {
        self.sd / (self.n as f64).sqrt()
    }
}

/// Mean and unbiased sample variance (zero variance for a single sample).
pub fn mean_and_variance(xs: &[f64]) -> Option<(f64, f64)> {
    if xs.is_empty() {
        return None;
    }
    let n = xs.len() as f64;
    let mean = xs.iter().sum::<f64>() / n;
    if xs.len() == 1 {
        return Some((mean, 0.0));
    }
    let ss: f64 = xs.iter().map(|x| (x - mean) * (x - mean)).sum();
    Some((mean, ss / (n - 1.0)))
}

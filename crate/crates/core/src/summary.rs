//! Per-arm, per-batch sufficient statistics.
//!
//! A [`BatchSummary`] is the only view of the data the bandit engine ever
//! gets: sample count, reward sum, sum of squared rewards, and the batch
//! context (total batch size and the traffic share the arm was served with).

use serde::{Deserialize, Serialize};

use crate::posterior::PosteriorError;

/// Sufficient statistics of one arm within one batch.
///
/// `batch` is one-based (batch 1 is the first batch); `arm` is a zero-based
/// index into the arm list.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BatchSummary {
    pub batch: u32,
    pub arm: usize,
    pub count: u64,
    pub mean: f64,
    pub sum: f64,
    pub sum_sq: f64,
    pub batch_total: u64,
    pub served_prob: f64,
}

impl BatchSummary {
    /// Builds a summary from the running sums. The mean is `sum / count`,
    /// or zero for an empty cell.
    pub fn from_sums(
        batch: u32,
        arm: usize,
        count: u64,
        sum: f64,
        sum_sq: f64,
        batch_total: u64,
        served_prob: f64,
    ) -> Self {
        let mean = if count > 0 { sum / count as f64 } else { 0.0 };
        Self {
            batch,
            arm,
            count,
            mean,
            sum,
            sum_sq,
            batch_total,
            served_prob,
        }
    }

    /// Summarizes raw reward values.
    pub fn from_rewards(
        batch: u32,
        arm: usize,
        rewards: &[f64],
        batch_total: u64,
        served_prob: f64,
    ) -> Self {
        let sum: f64 = rewards.iter().sum();
        let sum_sq: f64 = rewards.iter().map(|y| y * y).sum();
        Self::from_sums(
            batch,
            arm,
            rewards.len() as u64,
            sum,
            sum_sq,
            batch_total,
            served_prob,
        )
    }

    /// An arm that received no traffic in the batch.
    pub fn empty(batch: u32, arm: usize, batch_total: u64, served_prob: f64) -> Self {
        Self::from_sums(batch, arm, 0, 0.0, 0.0, batch_total, served_prob)
    }

    pub fn is_empty(&self) -> bool {
        self.count == 0
    }

    /// Checks the numeric invariants of a single summary.
    pub fn validate(&self) -> Result<(), PosteriorError> {
        if !(self.mean.is_finite() && self.sum.is_finite() && self.sum_sq.is_finite()) {
            return Err(PosteriorError::InvalidInput(format!(
                "non-finite statistics in batch {} arm {}",
                self.batch, self.arm
            )));
        }
        if self.batch == 0 {
            return Err(PosteriorError::InvalidInput("batch index must be >= 1".into()));
        }
        if self.count > self.batch_total {
            return Err(PosteriorError::InvalidInput(format!(
                "arm {} count {} exceeds batch total {}",
                self.arm, self.count, self.batch_total
            )));
        }
        if self.count > 0 {
            let n = self.count as f64;
            let scale = self.sum.abs().max(1.0);
            if (self.mean * n - self.sum).abs() > 1e-9 * scale {
                return Err(PosteriorError::InvalidInput(format!(
                    "mean inconsistent with sum in batch {} arm {}",
                    self.batch, self.arm
                )));
            }
            let floor = n * self.mean * self.mean;
            if self.sum_sq < floor - 1e-9 * floor.max(1.0) {
                return Err(PosteriorError::InvalidInput(format!(
                    "sum of squares below n*mean^2 in batch {} arm {}",
                    self.batch, self.arm
                )));
            }
        }
        Ok(())
    }
}

/// Checks that the summaries form one complete batch: one summary per arm,
/// in arm order, sharing a batch index, with counts adding up to the total.
pub fn validate_batch(summaries: &[BatchSummary], num_arms: usize) -> Result<(), PosteriorError> {
    if summaries.len() != num_arms {
        return Err(PosteriorError::InvalidInput(format!(
            "expected {num_arms} arm summaries, got {}",
            summaries.len()
        )));
    }
    let Some(first) = summaries.first() else {
        return Ok(());
    };
    let mut total = 0u64;
    for (k, s) in summaries.iter().enumerate() {
        s.validate()?;
        if s.arm != k || s.batch != first.batch || s.batch_total != first.batch_total {
            return Err(PosteriorError::InvalidInput(format!(
                "summary {k} does not belong to batch {} in arm order",
                first.batch
            )));
        }
        total += s.count;
    }
    if total != first.batch_total {
        return Err(PosteriorError::InvalidInput(format!(
            "arm counts sum to {total}, batch total is {}",
            first.batch_total
        )));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_rewards_matches_hand_sums() {
        let s = BatchSummary::from_rewards(1, 0, &[0.0, 1.0, 1.0, 0.0], 4, 1.0);
        assert_eq!(s.count, 4);
        assert_eq!(s.sum, 2.0);
        assert_eq!(s.sum_sq, 2.0);
        assert_eq!(s.mean, 0.5);
        s.validate().unwrap();
    }

    #[test]
    fn empty_cell_is_valid() {
        let s = BatchSummary::empty(3, 1, 10, 0.01);
        assert!(s.is_empty());
        s.validate().unwrap();
    }

    #[test]
    fn rejects_sum_sq_below_mean_square() {
        let mut s = BatchSummary::from_rewards(1, 0, &[1.0, 3.0], 2, 1.0);
        s.sum_sq = 1.0;
        assert!(s.validate().is_err());
    }

    #[test]
    fn batch_counts_must_add_up() {
        let a = BatchSummary::from_rewards(1, 0, &[1.0, 2.0], 3, 0.5);
        let b = BatchSummary::from_rewards(1, 1, &[1.0], 3, 0.5);
        validate_batch(&[a.clone(), b], 2).unwrap();
        let short = BatchSummary::empty(1, 1, 3, 0.5);
        assert!(validate_batch(&[a, short], 2).is_err());
    }
}

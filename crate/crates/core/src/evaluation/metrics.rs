//! Decision-quality metrics over campaign records.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::decide_from_alpha;
use crate::datasets::Hypothesis;
use crate::stats::{MeanEstimate, Rate, Z95};

#[derive(Debug, Error, PartialEq)]
pub enum MetricsError {
    #[error("no {0} records to evaluate")]
    Empty(&'static str),
    #[error("H1 record without a true best arm")]
    MissingBest,
}

/// Outcome of one run, as needed by the metrics.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecisionRecord {
    pub experiment: usize,
    pub run: u64,
    pub hypothesis: Hypothesis,
    pub true_best: Option<usize>,
    pub final_alpha: Vec<f64>,
    pub winner: Option<usize>,
    pub counts: Vec<u64>,
    pub total: u64,
}

impl DecisionRecord {
    /// Arm claimed at threshold `delta` (strictly above, lowest index on ties).
    pub fn claim(&self, delta: f64) -> Option<usize> {
        decide_from_alpha(&self.final_alpha, delta)
    }

    /// Share of samples served to arms other than the true best.
    pub fn regret(&self) -> Option<f64> {
        let best = self.true_best?;
        if self.total == 0 {
            return None;
        }
        Some(compute_regret(&self.counts, best))
    }
}

/// Share of H0 records that claim any winner.
pub fn compute_fpr(records: &[DecisionRecord], delta: f64) -> Result<Rate, MetricsError> {
    let h0: Vec<_> = records.iter().filter(|r| r.hypothesis == Hypothesis::H0).collect();
    if h0.is_empty() {
        return Err(MetricsError::Empty("H0"));
    }
    let claims = h0.iter().filter(|r| r.claim(delta).is_some()).count();
    Ok(Rate::wilson(claims as u64, h0.len() as u64, Z95))
}

/// Share of H1 records that claim the true best arm.
pub fn compute_power(records: &[DecisionRecord], delta: f64) -> Result<Rate, MetricsError> {
    let h1: Vec<_> = records.iter().filter(|r| r.hypothesis == Hypothesis::H1).collect();
    if h1.is_empty() {
        return Err(MetricsError::Empty("H1"));
    }
    let mut correct = 0u64;
    for r in &h1 {
        let best = r.true_best.ok_or(MetricsError::MissingBest)?;
        if r.claim(delta) == Some(best) {
            correct += 1;
        }
    }
    Ok(Rate::wilson(correct, h1.len() as u64, Z95))
}

/// Precision is undefined when nothing was claimed.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Precision {
    Defined(Rate),
    NoClaims,
}

impl Precision {
    pub fn value(&self) -> Option<f64> {
        match self {
            Precision::Defined(r) => Some(r.value),
            Precision::NoClaims => None,
        }
    }
}

/// Correct H1 claims over all claims (H0 claims count as false).
pub fn compute_precision(records: &[DecisionRecord], delta: f64) -> Precision {
    let mut claims = 0u64;
    let mut correct = 0u64;
    for r in records {
        if let Some(arm) = r.claim(delta) {
            claims += 1;
            if r.hypothesis == Hypothesis::H1 && r.true_best == Some(arm) {
                correct += 1;
            }
        }
    }
    if claims == 0 {
        Precision::NoClaims
    } else {
        Precision::Defined(Rate::wilson(correct, claims, Z95))
    }
}

/// Share of samples served to arms other than `best`.
pub fn compute_regret(counts: &[u64], best: usize) -> f64 {
    let total: u64 = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    (total - counts[best]) as f64 / total as f64
}

/// Mean regret over H1 records with a 95% normal interval.
pub fn mean_regret(records: &[DecisionRecord]) -> Result<MeanEstimate, MetricsError> {
    let xs: Vec<f64> = records.iter().filter_map(DecisionRecord::regret).collect();
    MeanEstimate::from_samples(&xs, Z95).ok_or(MetricsError::Empty("H1"))
}

/// Associative, commutative fold of the counts behind all four metrics.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
pub struct MetricTally {
    pub h0_runs: u64,
    pub h0_claims: u64,
    pub h1_runs: u64,
    pub h1_correct: u64,
    pub h1_wrong: u64,
    pub regret_sum: f64,
    pub regret_sum_sq: f64,
}

impl MetricTally {
    pub fn add(&mut self, r: &DecisionRecord, delta: f64) {
        let claim = r.claim(delta);
        match r.hypothesis {
            Hypothesis::H0 => {
                self.h0_runs += 1;
                self.h0_claims += claim.is_some() as u64;
            }
            Hypothesis::H1 => {
                self.h1_runs += 1;
                match claim {
                    Some(a) if Some(a) == r.true_best => self.h1_correct += 1,
                    Some(_) => self.h1_wrong += 1,
                    None => {}
                }
                let g = r.regret().unwrap_or(0.0);
                self.regret_sum += g;
                self.regret_sum_sq += g * g;
            }
        }
    }

    pub fn merge(mut self, other: &MetricTally) -> MetricTally {
        self.h0_runs += other.h0_runs;
        self.h0_claims += other.h0_claims;
        self.h1_runs += other.h1_runs;
        self.h1_correct += other.h1_correct;
        self.h1_wrong += other.h1_wrong;
        self.regret_sum += other.regret_sum;
        self.regret_sum_sq += other.regret_sum_sq;
        self
    }

    pub fn from_records<'a>(records: impl IntoIterator<Item = &'a DecisionRecord>, delta: f64) -> Self {
        let mut t = MetricTally::default();
        for r in records {
            t.add(r, delta);
        }
        t
    }

    pub fn fpr(&self) -> Option<Rate> {
        (self.h0_runs > 0).then(|| Rate::wilson(self.h0_claims, self.h0_runs, Z95))
    }

    pub fn power(&self) -> Option<Rate> {
        (self.h1_runs > 0).then(|| Rate::wilson(self.h1_correct, self.h1_runs, Z95))
    }

    pub fn precision(&self) -> Precision {
        let claims = self.h0_claims + self.h1_correct + self.h1_wrong;
        if claims == 0 {
            Precision::NoClaims
        } else {
            Precision::Defined(Rate::wilson(self.h1_correct, claims, Z95))
        }
    }

    pub fn regret(&self) -> Option<MeanEstimate> {
        if self.h1_runs == 0 {
            return None;
        }
        let n = self.h1_runs as f64;
        let mean = self.regret_sum / n;
        let var = if self.h1_runs > 1 {
            ((self.regret_sum_sq - n * mean * mean) / (n - 1.0)).max(0.0)
        } else {
            0.0
        };
        let sd = var.sqrt();
        let half = Z95 * sd / n.sqrt();
        Some(MeanEstimate {
            n: self.h1_runs,
            mean,
            sd,
            ci_lo: mean - half,
            ci_hi: mean + half,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rec(h: Hypothesis, best: Option<usize>, alpha: &[f64], counts: &[u64]) -> DecisionRecord {
        DecisionRecord {
            experiment: 0,
            run: 1,
            hypothesis: h,
            true_best: best,
            final_alpha: alpha.to_vec(),
            winner: decide_from_alpha(alpha, 0.95),
            counts: counts.to_vec(),
            total: counts.iter().sum(),
        }
    }

    #[test]
    fn fpr_counts_claims() {
        let rs: Vec<_> = [0.99, 0.3, 0.6]
            .iter()
            .map(|&m| rec(Hypothesis::H0, None, &[m, 1.0 - m], &[1, 1]))
            .collect();
        let r = compute_fpr(&rs, 0.95).unwrap();
        assert!((r.value - 1.0 / 3.0).abs() < 1e-15);
        assert!(r.ci_lo <= r.value && r.value <= r.ci_hi);
        assert_eq!(compute_fpr(&rs[1..], 0.95).unwrap().value, 0.0);
        assert_eq!(compute_fpr(&[], 0.95), Err(MetricsError::Empty("H0")));
    }

    #[test]
    fn power_requires_the_true_best() {
        let mut rs: Vec<_> = (0..9).map(|_| rec(Hypothesis::H1, Some(0), &[0.99, 0.01], &[9, 1])).collect();
        rs.push(rec(Hypothesis::H1, Some(0), &[0.01, 0.99], &[1, 9]));
        assert!((compute_power(&rs, 0.95).unwrap().value - 0.9).abs() < 1e-15);
    }

    #[test]
    fn precision_cases() {
        let mut rs: Vec<_> = (0..8).map(|_| rec(Hypothesis::H1, Some(1), &[0.02, 0.98], &[1, 1])).collect();
        assert_eq!(compute_precision(&rs, 0.95).value(), Some(1.0));
        rs.extend((0..2).map(|_| rec(Hypothesis::H0, None, &[0.97, 0.03], &[1, 1])));
        assert!((compute_precision(&rs, 0.95).value().unwrap() - 0.8).abs() < 1e-15);
        let none = vec![rec(Hypothesis::H0, None, &[0.5, 0.5], &[1, 1])];
        assert_eq!(compute_precision(&none, 0.95), Precision::NoClaims);
    }

    #[test]
    fn regret_cases() {
        assert_eq!(compute_regret(&[100, 0, 0], 0), 0.0);
        assert_eq!(compute_regret(&[0, 50, 50], 0), 1.0);
        assert!((compute_regret(&[1; 7], 0) - 6.0 / 7.0).abs() < 1e-15);
    }

    #[test]
    fn tally_matches_direct_metrics() {
        let rs = vec![
            rec(Hypothesis::H0, None, &[0.97, 0.03], &[5, 5]),
            rec(Hypothesis::H0, None, &[0.5, 0.5], &[5, 5]),
            rec(Hypothesis::H1, Some(0), &[0.99, 0.01], &[8, 2]),
            rec(Hypothesis::H1, Some(0), &[0.02, 0.98], &[3, 7]),
            rec(Hypothesis::H1, Some(1), &[0.6, 0.4], &[5, 5]),
        ];
        let left = MetricTally::from_records(&rs[..2], 0.95);
        let right = MetricTally::from_records(&rs[2..], 0.95);
        let t = left.merge(&right);
        assert_eq!(t, MetricTally::from_records(&rs, 0.95).merge(&MetricTally::default()));
        assert_eq!(t.fpr().unwrap(), compute_fpr(&rs, 0.95).unwrap());
        assert_eq!(t.power().unwrap(), compute_power(&rs, 0.95).unwrap());
        assert_eq!(t.precision(), compute_precision(&rs, 0.95));
        let m = mean_regret(&rs).unwrap();
        let g = t.regret().unwrap();
        assert!((m.mean - g.mean).abs() < 1e-15 && (m.sd - g.sd).abs() < 1e-12);
    }
}

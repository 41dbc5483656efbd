//! Reward generation: synthetic Gaussian arms (optionally trending) and
//! replay of recorded experiment logs.
//!
//! Batches are produced directly as per-arm sufficient statistics. Arm
//! assignments are i.i.d. categorical, drawn as one multinomial via
//! conditional binomials. For Gaussian rewards the batch mean
//! `N(θ, σ²/n)` and the within-batch sum of squared deviations `σ²χ²_{n−1}`
//! are independent, so a summary can be drawn without materializing the
//! individual rewards; the result has the same distribution as summarizing
//! `n` raw draws.

use std::collections::BTreeMap;
use std::io::{Read, Write};
use std::path::Path;

use rand::Rng;
use rand_distr::{Binomial, ChiSquared, Distribution, Poisson, StandardNormal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::allocation::Allocation;
use crate::posterior::WeightScheme;
use crate::summary::BatchSummary;

#[derive(Debug, Error)]
pub enum EnvironmentError {
    #[error("invalid environment: {0}")]
    Invalid(String),
    #[error("replay log has no data for batch {batch}, arm {}", arm + 1)]
    Coverage { batch: u32, arm: usize },
    #[error("replay log line {line}: {message}")]
    Parse { line: u64, message: String },
    #[error(transparent)]
    Io(#[from] std::io::Error),
}

/// Time profile of an arm's mean.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Trend {
    #[default]
    Stationary,
    /// `θ + 0.5 (cos(π(b−1)/20) − 1)`: a shared downward drift over 20
    /// batches that leaves every pairwise gap unchanged.
    CosineDecay,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ArmSpec {
    pub base_mean: f64,
    pub noise_sd: f64,
    #[serde(default)]
    pub trend: Trend,
}

impl ArmSpec {
    pub fn new(base_mean: f64, noise_sd: f64, trend: Trend) -> Result<Self, EnvironmentError> {
        let spec = Self {
            base_mean,
            noise_sd,
            trend,
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn validate(&self) -> Result<(), EnvironmentError> {
        if !self.base_mean.is_finite() || !(self.noise_sd > 0.0) || !self.noise_sd.is_finite() {
            return Err(EnvironmentError::Invalid(format!(
                "arm needs a finite mean and positive noise sd, got ({}, {})",
                self.base_mean, self.noise_sd
            )));
        }
        Ok(())
    }
}

/// True mean of an arm in batch `b` (one-based).
pub fn mean_at_batch(spec: &ArmSpec, b: u32) -> f64 {
    match spec.trend {
        Trend::Stationary => spec.base_mean,
        Trend::CosineDecay => {
            let phase = std::f64::consts::PI / 20.0 * (b as f64 - 1.0);
            spec.base_mean + 0.5 * (phase.cos() - 1.0)
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BatchKind {
    /// Every batch holds exactly `lambda` samples.
    #[default]
    FixedSize,
    /// Batch sizes are independent `Poisson(lambda)` draws.
    PoissonDuration,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BatchSchedule {
    pub kind: BatchKind,
    pub lambda: u64,
    pub num_batches: u32,
}

impl Default for BatchSchedule {
    fn default() -> Self {
        Self::fixed(500, 20)
    }
}

impl BatchSchedule {
    pub fn fixed(lambda: u64, num_batches: u32) -> Self {
        Self {
            kind: BatchKind::FixedSize,
            lambda,
            num_batches,
        }
    }

    pub fn poisson(lambda: u64, num_batches: u32) -> Self {
        Self {
            kind: BatchKind::PoissonDuration,
            lambda,
            num_batches,
        }
    }

    pub fn validate(&self, num_arms: usize) -> Result<(), EnvironmentError> {
        if self.num_batches == 0 {
            return Err(EnvironmentError::Invalid("need at least one batch".into()));
        }
        if (self.lambda as usize) < num_arms || self.lambda == 0 {
            return Err(EnvironmentError::Invalid(format!(
                "batch size {} is smaller than the number of arms {num_arms}",
                self.lambda
            )));
        }
        Ok(())
    }

    /// Size of the next batch.
    pub fn draw_total<R: Rng + ?Sized>(&self, rng: &mut R) -> u64 {
        match self.kind {
            BatchKind::FixedSize => self.lambda,
            BatchKind::PoissonDuration => {
                let pois = Poisson::new(self.lambda as f64).expect("lambda > 0");
                let t: f64 = pois.sample(rng);
                t as u64
            }
        }
    }
}

/// A source of batches for the engine.
pub trait RewardSource: Sync {
    fn num_arms(&self) -> usize;

    fn schedule(&self) -> &BatchSchedule;

    /// Reward variances, when the source knows them.
    fn known_variances(&self) -> Option<Vec<f64>> {
        None
    }

    /// Serves one batch under `allocation` and summarizes it per arm.
    fn draw_batch<R: Rng + ?Sized>(
        &self,
        allocation: &Allocation,
        batch: u32,
        rng: &mut R,
    ) -> Result<Vec<BatchSummary>, EnvironmentError>;
}

/// Multinomial counts via conditional binomials.
pub fn draw_assignments<R: Rng + ?Sized>(total: u64, probs: &[f64], rng: &mut R) -> Vec<u64> {
    let mut counts = vec![0u64; probs.len()];
    let mut left = total;
    let mut mass = 1.0f64;
    for (k, &p) in probs.iter().enumerate() {
        if left == 0 {
            break;
        }
        if k + 1 == probs.len() {
            counts[k] = left;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 1.0 };
        let c = if q >= 1.0 {
            left
        } else if q <= 0.0 {
            0
        } else {
            Binomial::new(left, q).expect("valid binomial").sample(rng)
        };
        counts[k] = c;
        left -= c;
        mass -= p;
    }
    counts
}

/// Sum and sum of squares of `n` draws from `N(mean, sd²)`.
fn gaussian_sums<R: Rng + ?Sized>(n: u64, mean: f64, sd: f64, rng: &mut R) -> (f64, f64) {
    if n == 0 {
        return (0.0, 0.0);
    }
    let nf = n as f64;
    let z: f64 = rng.sample(StandardNormal);
    let ybar = mean + sd / nf.sqrt() * z;
    let within = if n >= 2 {
        let chi: f64 = ChiSquared::new(nf - 1.0).expect("dof > 0").sample(rng);
        sd * sd * chi
    } else {
        0.0
    };
    (nf * ybar, within + nf * ybar * ybar)
}

fn check_allocation(allocation: &Allocation, k: usize) -> Result<(), EnvironmentError> {
    if allocation.num_arms() != k {
        return Err(EnvironmentError::Invalid(format!(
            "allocation has {} arms, environment has {k}",
            allocation.num_arms()
        )));
    }
    allocation
        .validate()
        .map_err(|e| EnvironmentError::Invalid(e.to_string()))
}

/// Independent Gaussian arms with a batch schedule.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SyntheticEnv {
    pub arms: Vec<ArmSpec>,
    pub schedule: BatchSchedule,
}

impl SyntheticEnv {
    pub fn new(arms: Vec<ArmSpec>, schedule: BatchSchedule) -> Result<Self, EnvironmentError> {
        if arms.is_empty() {
            return Err(EnvironmentError::Invalid("need at least one arm".into()));
        }
        for a in &arms {
            a.validate()?;
        }
        schedule.validate(arms.len())?;
        Ok(Self { arms, schedule })
    }

    pub fn true_means(&self, b: u32) -> Vec<f64> {
        self.arms.iter().map(|a| mean_at_batch(a, b)).collect()
    }
}

impl RewardSource for SyntheticEnv {
    fn num_arms(&self) -> usize {
        self.arms.len()
    }

    fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    fn known_variances(&self) -> Option<Vec<f64>> {
        Some(self.arms.iter().map(|a| a.noise_sd * a.noise_sd).collect())
    }

    fn draw_batch<R: Rng + ?Sized>(
        &self,
        allocation: &Allocation,
        batch: u32,
        rng: &mut R,
    ) -> Result<Vec<BatchSummary>, EnvironmentError> {
        draw_batch(self, allocation, batch, rng)
    }
}

/// Serves one synthetic batch.
pub fn draw_batch<R: Rng + ?Sized>(
    env: &SyntheticEnv,
    allocation: &Allocation,
    batch: u32,
    rng: &mut R,
) -> Result<Vec<BatchSummary>, EnvironmentError> {
    check_allocation(allocation, env.arms.len())?;
    if batch == 0 {
        return Err(EnvironmentError::Invalid("batch index must be >= 1".into()));
    }
    let total = env.schedule.draw_total(rng);
    let counts = draw_assignments(total, &allocation.e, rng);
    Ok(env
        .arms
        .iter()
        .enumerate()
        .map(|(k, arm)| {
            let (sum, sum_sq) = gaussian_sums(counts[k], mean_at_batch(arm, batch), arm.noise_sd, rng);
            BatchSummary::from_sums(batch, k, counts[k], sum, sum_sq, total, allocation.e[k])
        })
        .collect())
}

/// One `(batch, arm)` cell of a replay log.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub enum ReplayCell {
    /// Raw reward values, resampled with replacement.
    Pool(Vec<f64>),
    /// Only moments are known; rewards are drawn from `N(mean, sd²)`.
    Summary { count: u64, mean: f64, sd: f64 },
}

impl ReplayCell {
    fn is_empty(&self) -> bool {
        match self {
            ReplayCell::Pool(v) => v.is_empty(),
            ReplayCell::Summary { count, .. } => *count == 0,
        }
    }

    /// Mean and population sd of the cell.
    pub fn moments(&self) -> (f64, f64) {
        match self {
            ReplayCell::Pool(v) => {
                let n = v.len() as f64;
                let mean = v.iter().sum::<f64>() / n;
                let var = v.iter().map(|x| (x - mean) * (x - mean)).sum::<f64>() / n;
                (mean, var.sqrt())
            }
            ReplayCell::Summary { mean, sd, .. } => (*mean, *sd),
        }
    }

    fn resample<R: Rng + ?Sized>(&self, n: u64, rng: &mut R) -> (f64, f64) {
        match self {
            ReplayCell::Pool(values) => {
                let (mut sum, mut sum_sq) = (0.0, 0.0);
                for _ in 0..n {
                    let y = values[rng.random_range(0..values.len())];
                    sum += y;
                    sum_sq += y * y;
                }
                (sum, sum_sq)
            }
            ReplayCell::Summary { mean, sd, .. } => {
                if *sd > 0.0 {
                    gaussian_sums(n, *mean, *sd, rng)
                } else {
                    let nf = n as f64;
                    (nf * mean, nf * mean * mean)
                }
            }
        }
    }
}

/// Replay log format, chosen by the CSV header.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ReplayFormat {
    /// `batch,arm,value`, one row per reward
    Raw,
    /// `batch,arm,count,mean,sd`, one row per cell
    Summary,
}

/// Recorded rewards per `(batch, arm)`. Batches and arms are one-based in
/// files and zero-based for arms in memory.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct ReplayLog {
    cells: BTreeMap<(u32, usize), ReplayCell>,
    num_arms: usize,
    num_batches: u32,
}

impl ReplayLog {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn num_arms(&self) -> usize {
        self.num_arms
    }

    pub fn num_batches(&self) -> u32 {
        self.num_batches
    }

    pub fn insert(&mut self, batch: u32, arm: usize, cell: ReplayCell) {
        self.num_arms = self.num_arms.max(arm + 1);
        self.num_batches = self.num_batches.max(batch);
        self.cells.insert((batch, arm), cell);
    }

    fn push_value(&mut self, batch: u32, arm: usize, value: f64) {
        self.num_arms = self.num_arms.max(arm + 1);
        self.num_batches = self.num_batches.max(batch);
        match self
            .cells
            .entry((batch, arm))
            .or_insert_with(|| ReplayCell::Pool(Vec::new()))
        {
            ReplayCell::Pool(v) => v.push(value),
            cell @ ReplayCell::Summary { .. } => *cell = ReplayCell::Pool(vec![value]),
        }
    }

    /// Cell for `(batch, arm)`; a missing or empty cell is a coverage error.
    pub fn cell(&self, batch: u32, arm: usize) -> Result<&ReplayCell, EnvironmentError> {
        match self.cells.get(&(batch, arm)) {
            Some(c) if !c.is_empty() => Ok(c),
            _ => Err(EnvironmentError::Coverage { batch, arm }),
        }
    }

    pub fn format(&self) -> ReplayFormat {
        if self
            .cells
            .values()
            .all(|c| matches!(c, ReplayCell::Pool(_)))
        {
            ReplayFormat::Raw
        } else {
            ReplayFormat::Summary
        }
    }

    pub fn from_path(path: impl AsRef<Path>) -> Result<Self, EnvironmentError> {
        let file = std::fs::File::open(path)?;
        Self::from_reader(file)
    }

    pub fn from_reader<R: Read>(reader: R) -> Result<Self, EnvironmentError> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let header: Vec<String> = rdr
            .headers()
            .map_err(|e| parse_error(1, e.to_string()))?
            .iter()
            .map(str::to_ascii_lowercase)
            .collect();
        let format = match header.iter().map(String::as_str).collect::<Vec<_>>().as_slice() {
            ["batch", "arm", "value"] => ReplayFormat::Raw,
            ["batch", "arm", "count", "mean", "sd"] => ReplayFormat::Summary,
            other => {
                return Err(parse_error(
                    1,
                    format!("expected header batch,arm,value or batch,arm,count,mean,sd, got {other:?}"),
                ))
            }
        };
        let mut log = ReplayLog::new();
        for record in rdr.records() {
            let record = record.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                parse_error(line, e.to_string())
            })?;
            let line = record.position().map(|p| p.line()).unwrap_or(0);
            let field = |i: usize| record.get(i).unwrap_or("");
            let batch: u32 = parse_field(field(0), "batch", line)?;
            let arm: usize = parse_field(field(1), "arm", line)?;
            if batch == 0 || arm == 0 {
                return Err(parse_error(line, "batch and arm are one-based".into()));
            }
            match format {
                ReplayFormat::Raw => {
                    let value: f64 = parse_field(field(2), "value", line)?;
                    if !value.is_finite() {
                        return Err(parse_error(line, "value is not finite".into()));
                    }
                    log.push_value(batch, arm - 1, value);
                }
                ReplayFormat::Summary => {
                    let count: u64 = parse_field(field(2), "count", line)?;
                    let mean: f64 = parse_field(field(3), "mean", line)?;
                    let sd: f64 = parse_field(field(4), "sd", line)?;
                    if !mean.is_finite() || !sd.is_finite() || sd < 0.0 {
                        return Err(parse_error(line, "mean/sd must be finite with sd >= 0".into()));
                    }
                    if log.cells.contains_key(&(batch, arm - 1)) {
                        return Err(parse_error(
                            line,
                            format!("duplicate cell for batch {batch}, arm {arm}"),
                        ));
                    }
                    log.insert(batch, arm - 1, ReplayCell::Summary { count, mean, sd });
                }
            }
        }
        Ok(log)
    }

    /// Writes the log in its own format. Summary logs write every cell as a
    /// moment row (pools are collapsed to their moments).
    pub fn write_csv<W: Write>(&self, writer: W) -> Result<(), EnvironmentError> {
        let mut w = csv::Writer::from_writer(writer);
        let to_io = |e: csv::Error| EnvironmentError::Io(std::io::Error::other(e));
        match self.format() {
            ReplayFormat::Raw => {
                w.write_record(["batch", "arm", "value"]).map_err(to_io)?;
                for (&(b, k), cell) in &self.cells {
                    if let ReplayCell::Pool(values) = cell {
                        for v in values {
                            w.write_record([b.to_string(), (k + 1).to_string(), v.to_string()])
                                .map_err(to_io)?;
                        }
                    }
                }
            }
            ReplayFormat::Summary => {
                w.write_record(["batch", "arm", "count", "mean", "sd"]).map_err(to_io)?;
                for (&(b, k), cell) in &self.cells {
                    let count = match cell {
                        ReplayCell::Pool(v) => v.len() as u64,
                        ReplayCell::Summary { count, .. } => *count,
                    };
                    let (mean, sd) = cell.moments();
                    w.write_record([
                        b.to_string(),
                        (k + 1).to_string(),
                        count.to_string(),
                        mean.to_string(),
                        sd.to_string(),
                    ])
                    .map_err(to_io)?;
                }
            }
        }
        w.flush()?;
        Ok(())
    }
}

fn parse_error(line: u64, message: String) -> EnvironmentError {
    EnvironmentError::Parse { line, message }
}

fn parse_field<T: std::str::FromStr>(s: &str, name: &str, line: u64) -> Result<T, EnvironmentError> {
    s.parse()
        .map_err(|_| parse_error(line, format!("cannot parse {name} from {s:?}")))
}

/// Replays a log under a batch schedule.
#[derive(Debug, Clone)]
pub struct ReplayEnv {
    pub log: ReplayLog,
    pub schedule: BatchSchedule,
}

impl ReplayEnv {
    pub fn new(log: ReplayLog, schedule: BatchSchedule) -> Result<Self, EnvironmentError> {
        if log.num_arms() == 0 {
            return Err(EnvironmentError::Invalid("replay log is empty".into()));
        }
        schedule.validate(log.num_arms())?;
        Ok(Self { log, schedule })
    }
}

impl RewardSource for ReplayEnv {
    fn num_arms(&self) -> usize {
        self.log.num_arms()
    }

    fn schedule(&self) -> &BatchSchedule {
        &self.schedule
    }

    fn draw_batch<R: Rng + ?Sized>(
        &self,
        allocation: &Allocation,
        batch: u32,
        rng: &mut R,
    ) -> Result<Vec<BatchSummary>, EnvironmentError> {
        replay_batch(&self.log, &self.schedule, allocation, batch, rng)
    }
}

/// Serves one batch by resampling the log's `(batch, arm)` cells.
pub fn replay_batch<R: Rng + ?Sized>(
    log: &ReplayLog,
    schedule: &BatchSchedule,
    allocation: &Allocation,
    batch: u32,
    rng: &mut R,
) -> Result<Vec<BatchSummary>, EnvironmentError> {
    let k = log.num_arms();
    check_allocation(allocation, k)?;
    let cells = (0..k)
        .map(|arm| log.cell(batch, arm))
        .collect::<Result<Vec<_>, _>>()?;
    let total = schedule.draw_total(rng);
    let counts = draw_assignments(total, &allocation.e, rng);
    Ok(cells
        .iter()
        .enumerate()
        .map(|(arm, cell)| {
            let (sum, sum_sq) = cell.resample(counts[arm], rng);
            BatchSummary::from_sums(batch, arm, counts[arm], sum, sum_sq, total, allocation.e[arm])
        })
        .collect())
}

/// Realized `Σ_b φ_b²` (over the batch's `T_b` samples, each weighted
/// `φ²/T_b`) divided by its expectation. Values near 1 mean the batch
/// weights satisfy the variance-convergence condition for the schedule.
pub fn check_variance_convergence<R: Rng + ?Sized>(
    schedule: &BatchSchedule,
    weight: WeightScheme,
    num_batches: u32,
    rng: &mut R,
) -> f64 {
    let b = num_batches as f64;
    match weight {
        // each batch contributes T_b * 1/T_b = 1
        WeightScheme::PhiOne => {
            let realized: f64 = (0..num_batches).map(|_| 1.0).sum();
            realized / b
        }
        // each batch contributes T_b * T_b/T_b = T_b
        WeightScheme::PhiSqrtT => {
            let realized: f64 = (0..num_batches)
                .map(|_| schedule.draw_total(rng) as f64)
                .sum();
            realized / (b * schedule.lambda as f64)
        }
    }
}

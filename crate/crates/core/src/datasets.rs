//! Built-in synthetic datasets and the generator behind them.
//!
//! Datasets A and B hold ten experiments of ten unit-variance arms each:
//! five with a unique best arm (H1) and five with `K′` equivalent best arms
//! (H0; `K′ = 2` in A and `K′ = 3` in B). The primed variants A′ and B′ start
//! from the same means and follow the cosine decay trend.

use std::fmt;
use std::io::{Read, Write};
use std::str::FromStr;

use rand::Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::environment::{ArmSpec, BatchSchedule, EnvironmentError, SyntheticEnv, Trend};

#[derive(Debug, Error)]
pub enum DatasetError {
    #[error("unknown dataset {0:?} (expected A, A', B or B')")]
    Unknown(String),
    #[error("invalid dataset: {0}")]
    Invalid(String),
    #[error("dataset JSON: {0}")]
    Json(#[from] serde_json::Error),
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Environment(#[from] EnvironmentError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Hypothesis {
    /// `K′` arms share the maximal mean.
    H0,
    /// A unique best arm exists.
    H1,
}

impl fmt::Display for Hypothesis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Hypothesis::H0 => "H0",
            Hypothesis::H1 => "H1",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentSpec {
    pub means: Vec<f64>,
    pub k_prime: u32,
    pub hypothesis: Hypothesis,
    #[serde(default)]
    pub trend: Trend,
}

impl ExperimentSpec {
    /// Index of the best arm under H1.
    pub fn true_best(&self) -> Option<usize> {
        match self.hypothesis {
            Hypothesis::H0 => None,
            Hypothesis::H1 => Some(crate::allocation::argmax_lowest(&self.means).0),
        }
    }

    /// H0: exactly `K′` arms tie at the maximum. H1: a unique maximum.
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.means.len() < 2 || self.means.iter().any(|m| !m.is_finite()) {
            return Err(DatasetError::Invalid("need at least two finite arm means".into()));
        }
        let max = self.means.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let ties = self.means.iter().filter(|&&m| m == max).count();
        match self.hypothesis {
            Hypothesis::H0 if ties != self.k_prime as usize => Err(DatasetError::Invalid(format!(
                "H0 experiment has {ties} maximal arms, expected K'={}",
                self.k_prime
            ))),
            Hypothesis::H1 if ties != 1 => Err(DatasetError::Invalid(format!(
                "H1 experiment has {ties} maximal arms"
            ))),
            _ if self.k_prime < 2 || self.k_prime as usize > self.means.len() => Err(
                DatasetError::Invalid(format!("K'={} out of range", self.k_prime)),
            ),
            _ => Ok(()),
        }
    }

    /// Environment with unit-variance arms (or `noise_sd`) under `schedule`.
    pub fn environment(&self, noise_sd: f64, schedule: BatchSchedule) -> Result<SyntheticEnv, DatasetError> {
        let arms = self
            .means
            .iter()
            .map(|&m| ArmSpec::new(m, noise_sd, self.trend))
            .collect::<Result<Vec<_>, _>>()?;
        Ok(SyntheticEnv::new(arms, schedule)?)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DatasetSpec {
    pub name: String,
    pub experiments: Vec<ExperimentSpec>,
}

impl DatasetSpec {
    pub fn validate(&self) -> Result<(), DatasetError> {
        if self.experiments.is_empty() {
            return Err(DatasetError::Invalid(format!("dataset {} has no experiments", self.name)));
        }
        for (i, e) in self.experiments.iter().enumerate() {
            e.validate()
                .map_err(|err| DatasetError::Invalid(format!("experiment {}: {err}", i + 1)))?;
        }
        Ok(())
    }

    pub fn by_hypothesis(&self, h: Hypothesis) -> impl Iterator<Item = (usize, &ExperimentSpec)> {
        self.experiments
            .iter()
            .enumerate()
            .filter(move |(_, e)| e.hypothesis == h)
    }

    pub fn to_json(&self) -> Result<String, DatasetError> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn write_json<W: Write>(&self, writer: W) -> Result<(), DatasetError> {
        serde_json::to_writer_pretty(writer, self)?;
        Ok(())
    }

    pub fn from_json_reader<R: Read>(reader: R) -> Result<Self, DatasetError> {
        let spec: DatasetSpec = serde_json::from_reader(reader)?;
        spec.validate()?;
        Ok(spec)
    }

    pub fn from_json(s: &str) -> Result<Self, DatasetError> {
        Self::from_json_reader(s.as_bytes())
    }
}

/// Names of the built-in datasets.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum BuiltinDataset {
    A,
    #[serde(rename = "A'")]
    APrime,
    B,
    #[serde(rename = "B'")]
    BPrime,
}

impl BuiltinDataset {
    pub const ALL: [BuiltinDataset; 4] = [
        BuiltinDataset::A,
        BuiltinDataset::APrime,
        BuiltinDataset::B,
        BuiltinDataset::BPrime,
    ];

    pub fn name(self) -> &'static str {
        match self {
            BuiltinDataset::A => "A",
            BuiltinDataset::APrime => "A'",
            BuiltinDataset::B => "B",
            BuiltinDataset::BPrime => "B'",
        }
    }
}

impl fmt::Display for BuiltinDataset {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for BuiltinDataset {
    type Err = DatasetError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim() {
            "A" | "a" => Ok(BuiltinDataset::A),
            "A'" | "a'" | "A′" | "Aprime" | "A-prime" | "a-prime" => Ok(BuiltinDataset::APrime),
            "B" | "b" => Ok(BuiltinDataset::B),
            "B'" | "b'" | "B′" | "Bprime" | "B-prime" | "b-prime" => Ok(BuiltinDataset::BPrime),
            other => Err(DatasetError::Unknown(other.to_string())),
        }
    }
}

#[allow(clippy::approx_constant)]
const A_H1: [[f64; 10]; 5] = [
    [0.872, 0.812, 0.433, 0.16, -0.125, -0.264, -0.306, -0.381, -0.536, -1.151],
    [0.572, 0.451, 0.45, 0.291, 0.251, -0.061, -0.134, -0.342, -0.468, -0.55],
    [1.05, 0.846, 0.83, 0.371, 0.095, 0.025, -0.096, -0.318, -0.374, -0.444],
    [0.626, 0.566, 0.466, 0.443, 0.256, 0.244, 0.143, -0.038, -0.149, -0.377],
    [0.414, 0.381, 0.205, 0.115, 0.099, 0.093, 0.06, -0.1, -0.111, -0.153],
];

const A_H0: [[f64; 10]; 5] = [
    [0.731, 0.731, 0.567, 0.021, -0.086, -0.161, -0.192, -0.439, -0.55, -1.03],
    [0.265, 0.265, 0.117, -0.006, -0.198, -0.336, -0.344, -0.346, -0.423, -0.559],
    [0.419, 0.419, 0.309, 0.293, 0.15, 0.06, -0.104, -0.175, -0.176, -0.571],
    [1.093, 1.093, 0.76, 0.438, 0.158, 0.08, -0.252, -0.698, -0.722, -1.011],
    [0.599, 0.599, 0.565, 0.212, 0.189, 0.093, 0.061, -0.188, -0.319, -0.335],
];

const B_H1: [[f64; 10]; 5] = [
    [0.82, 0.251, -0.028, -0.208, -0.421, -0.455, -0.529, -0.623, -0.897, -1.068],
    [0.128, 0.005, -0.078, -0.118, -0.169, -0.319, -0.374, -0.439, -0.494, -0.594],
    [0.866, 0.734, 0.386, 0.271, 0.251, 0.0, -0.157, -0.168, -0.422, -0.934],
    [0.639, 0.254, 0.217, 0.163, 0.108, -0.02, -0.066, -0.21, -0.317, -0.929],
    [0.792, 0.348, 0.033, -0.039, -0.046, -0.095, -0.191, -0.549, -1.017, -1.33],
];

const B_H0: [[f64; 10]; 5] = [
    [1.146, 1.146, 1.146, 0.588, 0.276, 0.27, 0.021, -0.01, -0.298, -0.559],
    [1.116, 1.116, 1.116, 0.68, 0.185, 0.056, -0.077, -0.135, -0.711, -1.217],
    [0.5, 0.5, 0.5, 0.306, 0.044, 0.024, -0.037, -0.188, -0.191, -0.415],
    [0.421, 0.421, 0.421, 0.368, 0.262, 0.023, -0.327, -0.339, -0.72, -1.02],
    [0.684, 0.684, 0.684, 0.624, 0.609, 0.412, 0.175, -0.202, -0.231, -0.692],
];

/// The built-in dataset, experiments in table order (H1 first, then H0).
pub fn builtin_dataset(which: BuiltinDataset) -> DatasetSpec {
    let (h1, h0, k_prime, trend) = match which {
        BuiltinDataset::A => (&A_H1, &A_H0, 2, Trend::Stationary),
        BuiltinDataset::APrime => (&A_H1, &A_H0, 2, Trend::CosineDecay),
        BuiltinDataset::B => (&B_H1, &B_H0, 3, Trend::Stationary),
        BuiltinDataset::BPrime => (&B_H1, &B_H0, 3, Trend::CosineDecay),
    };
    let make = |rows: &[[f64; 10]; 5], hypothesis| -> Vec<ExperimentSpec> {
        rows.iter()
            .map(|m| ExperimentSpec {
                means: m.to_vec(),
                k_prime,
                hypothesis,
                trend,
            })
            .collect()
    };
    DatasetSpec {
        name: which.name().to_string(),
        experiments: [make(h1, Hypothesis::H1), make(h0, Hypothesis::H0)].concat(),
    }
}

/// Looks a built-in dataset up by name.
pub fn builtin_by_name(name: &str) -> Result<DatasetSpec, DatasetError> {
    Ok(builtin_dataset(name.parse()?))
}

/// How the spread parameter of the mean generator is read.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "value")]
pub enum MeanSpread {
    /// Standard deviation of the arm-mean distribution.
    Sd(f64),
    /// Variance of the arm-mean distribution.
    Variance(f64),
}

impl Default for MeanSpread {
    fn default() -> Self {
        MeanSpread::Sd(0.5)
    }
}

impl MeanSpread {
    pub fn sd(self) -> f64 {
        match self {
            MeanSpread::Sd(s) => s,
            MeanSpread::Variance(v) => v.sqrt(),
        }
    }
}

/// Draws `k` arm means from `N(0, spread)` sorted in decreasing order.
/// Under H0 the arms ranked 2..=K′ are overwritten with the best mean; under
/// H1 draws with a tied maximum are rejected and redrawn.
pub fn generate_experiment<R: Rng + ?Sized>(
    k: usize,
    k_prime: u32,
    hypothesis: Hypothesis,
    spread: MeanSpread,
    rng: &mut R,
) -> Result<ExperimentSpec, DatasetError> {
    if k_prime < 2 || k_prime as usize > k {
        return Err(DatasetError::Invalid(format!(
            "need 2 <= K' <= K, got K'={k_prime}, K={k}"
        )));
    }
    let sd = spread.sd();
    let normal = Normal::new(0.0, sd)
        .map_err(|_| DatasetError::Invalid(format!("invalid mean spread {sd}")))?;
    loop {
        let mut means: Vec<f64> = (0..k).map(|_| normal.sample(rng)).collect();
        means.sort_by(|a, b| b.total_cmp(a));
        match hypothesis {
            Hypothesis::H1 if means[0] == means[1] => continue,
            Hypothesis::H1 => {}
            Hypothesis::H0 => {
                let kp = k_prime as usize;
                if kp < k && means[kp] == means[0] {
                    continue;
                }
                for i in 1..kp {
                    means[i] = means[0];
                }
            }
        }
        return Ok(ExperimentSpec {
            means,
            k_prime,
            hypothesis,
            trend: Trend::Stationary,
        });
    }
}

//! Bayesian batch bandits for best-arm identification.
//!
//! The crate simulates Thompson sampling (TS) and top-two Thompson sampling
//! (TTTS) allocation under batched traffic, with either the naive batch (NB)
//! or the weighted batch (WB) posterior, and provides the evaluation tools
//! around them: false-positive rate, power, precision, regret, and
//! calibration of the posterior reshaping parameter.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod allocation;
pub mod datasets;
pub mod engine;
pub mod environment;
pub mod evaluation;
pub mod posterior;
pub mod stats;
pub mod summary;

pub use allocation::{
    apply_floor, decide_winner, estimate_optimal_probs, fpr_for_threshold, integrate_optimal_probs,
    threshold_for_fpr, ts_target, ttts_target, Allocation, AllocationError, AlphaMethod, DecisionRule,
    OptimalProbs,
};
pub use engine::{
    run_experiment, run_monte_carlo, run_monte_carlo_map, substream_seed, EngineError,
    ExperimentConfig, RunTrajectory, SamplingRule, VarianceSetting,
};
pub use environment::{
    ArmSpec, BatchSchedule, EnvironmentError, ReplayEnv, ReplayLog, RewardSource, SyntheticEnv, Trend,
};
pub use posterior::{
    GaussianPosterior, PosteriorError, PosteriorSet, StatisticScheme, VarianceMode, WeightScheme,
};
pub use summary::BatchSummary;

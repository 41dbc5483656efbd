//! Campaign metrics, neutral-η calibration and packaged studies.

pub mod calibration;
pub mod campaign;
pub mod metrics;
pub mod report;
pub mod studies;

pub use calibration::{calibrate_neutral_eta, CalibrationResult, CalibrationSettings};
pub use campaign::{run_dataset_campaign, CampaignResult, CampaignSettings};
pub use metrics::{
    compute_fpr, compute_power, compute_precision, compute_regret, DecisionRecord, MetricTally,
    Precision,
};
pub use report::MetricRow;
pub use studies::{bias_demo, convergence_study, BiasDemoResult, BiasDemoSettings, ConvergenceResult, ConvergenceSettings};

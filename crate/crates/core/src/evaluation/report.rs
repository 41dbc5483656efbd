//! CSV emitters for campaign metrics and studies.
//!
//! Floats are written with fixed precision so that identical results give
//! byte-identical files. Missing values are written as `NA`.

use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::evaluation::calibration::CalibrationResult;
use crate::evaluation::studies::{BiasDemoResult, ConvergenceResult, ZSummary};
use crate::posterior::StatisticScheme;

pub const METRICS_HEADER: &str = "metric,policy,dataset,eta,value,ci_lo,ci_hi,runs,seed";
pub const CALIBRATION_HEADER: &str =
    "k_prime,eta,alpha1_mean,alpha1_variance,target_mean,target_variance,distance,fpr,fpr_ci_lo,fpr_ci_hi,delta,runs,seed,is_best";
pub const BIAS_SUMMARY_HEADER: &str = "rule,statistic,runs,mean,sd,ci99_lo,ci99_hi,seed";
pub const BIAS_HISTOGRAM_HEADER: &str = "rule,statistic,bin_lo,bin_hi,count,density";
pub const BIAS_SAMPLES_HEADER: &str = "run,z_nb,z_wb";
pub const CONVERGENCE_SUMMARY_HEADER: &str =
    "k,k_prime,rule,eta,runs,alpha1_mean,alpha1_variance,beta_a,beta_b,target_mean,target_variance,delta,exceed_rate,exceed_ci_lo,exceed_ci_hi,seed";

/// One row of the metrics table.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricRow {
    pub metric: String,
    pub policy: String,
    pub dataset: String,
    pub eta: f64,
    pub value: Option<f64>,
    pub ci_lo: Option<f64>,
    pub ci_hi: Option<f64>,
    pub runs: u64,
    pub seed: u64,
}

fn fixed(x: f64) -> String {
    format!("{x:.6}")
}

fn opt(x: Option<f64>) -> String {
    x.map(fixed).unwrap_or_else(|| "NA".to_string())
}

fn eta_str(eta: f64) -> String {
    format!("{eta:.4}")
}

/// Quotes a field if it contains a delimiter, quote or newline.
fn field(s: &str) -> String {
    if s.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

impl MetricRow {
    pub fn to_csv_line(&self) -> String {
        format!(
            "{},{},{},{},{},{},{},{},{}",
            field(&self.metric),
            field(&self.policy),
            field(&self.dataset),
            eta_str(self.eta),
            opt(self.value),
            opt(self.ci_lo),
            opt(self.ci_hi),
            self.runs,
            self.seed
        )
    }
}

pub fn write_metrics_csv<W: Write>(rows: &[MetricRow], mut w: W) -> io::Result<()> {
    writeln!(w, "{METRICS_HEADER}")?;
    for r in rows {
        writeln!(w, "{}", r.to_csv_line())?;
    }
    w.flush()
}

pub fn write_calibration_csv<W: Write>(res: &CalibrationResult, mut w: W) -> io::Result<()> {
    writeln!(w, "{CALIBRATION_HEADER}")?;
    for p in &res.curve {
        writeln!(
            w,
            "{},{},{},{},{},{},{:.6e},{},{},{},{},{},{},{}",
            res.k_prime,
            eta_str(p.eta),
            fixed(p.alpha1_mean),
            fixed(p.alpha1_variance),
            fixed(res.target_mean),
            fixed(res.target_variance),
            p.distance,
            fixed(p.fpr.value),
            fixed(p.fpr.ci_lo),
            fixed(p.fpr.ci_hi),
            fixed(res.delta),
            res.runs,
            res.seed,
            (p.eta == res.eta_star) as u8
        )?;
    }
    w.flush()
}

fn statistic_label(s: StatisticScheme) -> &'static str {
    match s {
        StatisticScheme::Naive => "NB",
        StatisticScheme::Weighted => "WB",
    }
}

pub fn write_bias_summary_csv<W: Write>(results: &[BiasDemoResult], mut w: W) -> io::Result<()> {
    writeln!(w, "{BIAS_SUMMARY_HEADER}")?;
    for r in results {
        for z in [&r.nb, &r.wb] {
            writeln!(
                w,
                "{},{},{},{},{},{},{},{}",
                r.rule.label(),
                statistic_label(z.statistic),
                r.runs,
                fixed(z.estimate.mean),
                fixed(z.estimate.sd),
                fixed(z.ci99_lo),
                fixed(z.ci99_hi),
                r.seed
            )?;
        }
    }
    w.flush()
}

fn histogram_lines(rule: &str, z: &ZSummary, w: &mut impl Write) -> io::Result<()> {
    let h = &z.histogram;
    let width = h.bin_width();
    let total = h.total() as f64;
    for (i, &c) in h.counts.iter().enumerate() {
        let lo = h.lo + i as f64 * width;
        writeln!(
            w,
            "{},{},{},{},{},{}",
            rule,
            statistic_label(z.statistic),
            fixed(lo),
            fixed(lo + width),
            c,
            fixed(c as f64 / (total * width))
        )?;
    }
    Ok(())
}

pub fn write_bias_histogram_csv<W: Write>(results: &[BiasDemoResult], mut w: W) -> io::Result<()> {
    writeln!(w, "{BIAS_HISTOGRAM_HEADER}")?;
    for r in results {
        histogram_lines(r.rule.label(), &r.nb, &mut w)?;
        histogram_lines(r.rule.label(), &r.wb, &mut w)?;
    }
    w.flush()
}

pub fn write_bias_samples_csv<W: Write>(result: &BiasDemoResult, mut w: W) -> io::Result<()> {
    writeln!(w, "{BIAS_SAMPLES_HEADER}")?;
    for (i, (a, b)) in result.samples.iter().enumerate() {
        writeln!(w, "{},{},{}", i + 1, fixed(*a), fixed(*b))?;
    }
    w.flush()
}

pub fn write_convergence_summary_csv<W: Write>(res: &ConvergenceResult, mut w: W) -> io::Result<()> {
    let s = &res.settings;
    writeln!(w, "{CONVERGENCE_SUMMARY_HEADER}")?;
    writeln!(
        w,
        "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}",
        s.k,
        s.k_prime,
        s.rule.label(),
        eta_str(s.eta),
        s.runs,
        fixed(res.alpha1_mean),
        fixed(res.alpha1_variance),
        1,
        s.k_prime - 1,
        fixed(res.target_mean),
        fixed(res.target_variance),
        fixed(res.delta),
        fixed(res.exceedance.value),
        fixed(res.exceedance.ci_lo),
        fixed(res.exceedance.ci_hi),
        s.seed
    )?;
    w.flush()
}

/// `run,alpha_1,…,alpha_K′`, one row per run.
pub fn write_convergence_alphas_csv<W: Write>(res: &ConvergenceResult, mut w: W) -> io::Result<()> {
    let kp = res.settings.k_prime as usize;
    let header: Vec<String> = std::iter::once("run".to_string())
        .chain((1..=kp).map(|i| format!("alpha_{i}")))
        .collect();
    writeln!(w, "{}", header.join(","))?;
    for (i, a) in res.alphas.iter().enumerate() {
        let cells: Vec<String> = a.iter().map(|&x| fixed(x)).collect();
        writeln!(w, "{},{}", i + 1, cells.join(","))?;
    }
    w.flush()
}

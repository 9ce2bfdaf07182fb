//! Accuracy and detection metrics computed from epoch logs.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::LosIndicator;
use crate::runtime::{EpochLog, Estimator};
use crate::types::NodeKind;

/// Fraction of `errors` that are `<=` each threshold.
pub fn error_cdf(errors: &[f64], thresholds: &[f64]) -> Result<Vec<f64>> {
    if errors.is_empty() {
        return Err(Error::EmptyInput("error sample"));
    }
    let mut sorted = errors.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len() as f64;
    Ok(thresholds
        .iter()
        .map(|&x| sorted.partition_point(|&e| e <= x) as f64 / n)
        .collect())
}

/// `count` evenly spaced thresholds starting at zero.
pub fn thresholds(step: f64, count: usize) -> Vec<f64> {
    (0..count).map(|i| i as f64 * step).collect()
}

pub fn mean(xs: &[f64]) -> Option<f64> {
    (!xs.is_empty()).then(|| xs.iter().sum::<f64>() / xs.len() as f64)
}

/// Standard error of the mean; zero for fewer than two samples.
pub fn standard_error(xs: &[f64]) -> f64 {
    let n = xs.len();
    if n < 2 {
        return 0.0;
    }
    let m = xs.iter().sum::<f64>() / n as f64;
    let var = xs.iter().map(|x| (x - m) * (x - m)).sum::<f64>() / (n - 1) as f64;
    (var / n as f64).sqrt()
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct DetectionStats {
    /// `P(detected LOS | true LOS)`; absent when no LOS event occurred.
    pub p_d: Option<f64>,
    /// `P(detected LOS | true NLOS)`; absent when no NLOS event occurred.
    pub false_alarm: Option<f64>,
    pub los_events: usize,
    pub nlos_events: usize,
}

pub fn detection_probability(truth: &[LosIndicator], detected: &[LosIndicator]) -> Result<DetectionStats> {
    if truth.len() != detected.len() {
        return Err(Error::domain(format!(
            "{} true states but {} detections",
            truth.len(),
            detected.len()
        )));
    }
    let mut s = DetectionStats::default();
    let (mut hits, mut false_hits) = (0usize, 0usize);
    for (t, d) in truth.iter().zip(detected) {
        match t {
            LosIndicator::Los => {
                s.los_events += 1;
                hits += usize::from(d.is_los());
            }
            LosIndicator::Nlos => {
                s.nlos_events += 1;
                false_hits += usize::from(d.is_los());
            }
        }
    }
    s.p_d = (s.los_events > 0).then(|| hits as f64 / s.los_events as f64);
    s.false_alarm = (s.nlos_events > 0).then(|| false_hits as f64 / s.nlos_events as f64);
    Ok(s)
}

/// Per-record errors of `estimator` for mobile nodes at steps `t > burn_in`.
pub fn collect_errors(logs: &[EpochLog], estimator: Estimator, burn_in: usize) -> Vec<f64> {
    logs.iter()
        .filter(|l| l.t > burn_in)
        .flat_map(|l| l.records.iter())
        .filter(|r| r.kind == NodeKind::Mobile)
        .filter_map(|r| r.error(estimator))
        .collect()
}

/// Aligned (true, detected) streams over measured links after burn-in.
/// Links without a detection (no neighbor broadcast yet) are skipped.
pub fn collect_detections(logs: &[EpochLog], burn_in: usize) -> (Vec<LosIndicator>, Vec<LosIndicator>) {
    logs.iter()
        .filter(|l| l.t > burn_in)
        .flat_map(|l| l.records.iter())
        .flat_map(|r| r.links.iter())
        .filter_map(|link| link.detected_z.map(|d| (link.true_z, d)))
        .unzip()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct EstimatorSummary {
    pub estimator: Estimator,
    pub mean_error: f64,
    pub samples: usize,
    /// CDF evaluated at [`RunSummary::thresholds`].
    pub cdf: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunSummary {
    pub seed: u64,
    pub burn_in: usize,
    pub thresholds: Vec<f64>,
    pub estimators: Vec<EstimatorSummary>,
    pub detection: DetectionStats,
    pub resets: usize,
    pub degenerate: usize,
    /// Wall-clock time of the run; not part of any written output.
    #[serde(skip)]
    pub runtime_seconds: f64,
}

impl RunSummary {
    pub fn get(&self, estimator: Estimator) -> Option<&EstimatorSummary> {
        self.estimators.iter().find(|s| s.estimator == estimator)
    }

    pub fn mean_error(&self, estimator: Estimator) -> Option<f64> {
        self.get(estimator).map(|s| s.mean_error)
    }
}

pub fn summarize(
    logs: &[EpochLog],
    estimators: &[Estimator],
    burn_in: usize,
    thresholds: &[f64],
    seed: u64,
) -> Result<RunSummary> {
    let mut out = Vec::with_capacity(estimators.len());
    for &e in estimators {
        let errors = collect_errors(logs, e, burn_in);
        let cdf = error_cdf(&errors, thresholds)?;
        out.push(EstimatorSummary {
            estimator: e,
            mean_error: mean(&errors).expect("non-empty after error_cdf"),
            samples: errors.len(),
            cdf,
        });
    }
    let (truth, detected) = collect_detections(logs, burn_in);
    Ok(RunSummary {
        seed,
        burn_in,
        thresholds: thresholds.to_vec(),
        estimators: out,
        detection: detection_probability(&truth, &detected)?,
        resets: logs.iter().map(|l| l.resets.len()).sum(),
        degenerate: logs.iter().map(|l| l.degenerate.len()).sum(),
        runtime_seconds: 0.0,
    })
}

use std::collections::BTreeMap;
use std::time::Duration;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReportParams {
    pub d: usize,
    pub m: usize,
    pub seed: u64,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub eps: Option<f64>,
    pub trials: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CaseDeviation {
    pub case_id: String,
    pub deviation: f64,
}

/// Equal-width bins over `[0, upper]`; `counts[b]` covers `[edges[b], edges[b+1])`,
/// with the last bin closed on the right.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Histogram {
    pub edges: Vec<f64>,
    pub counts: Vec<u64>,
}

impl Histogram {
    pub fn from_values(values: &[f64], bins: usize) -> Self {
        let bins = bins.max(1);
        let upper = values.iter().copied().fold(0.0, f64::max);
        let width = if upper > 0.0 { upper / bins as f64 } else { 1.0 };
        let edges = (0..=bins).map(|b| b as f64 * width).collect();
        let mut counts = vec![0u64; bins];
        for &v in values {
            let b = ((v / width) as usize).min(bins - 1);
            counts[b] += 1;
        }
        Self { edges, counts }
    }
}

/// Per-case deviations from one experiment.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub label: String,
    pub params: ReportParams,
    pub per_case: Vec<CaseDeviation>,
    pub max_deviation: f64,
    pub runtime_ms: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub histogram: Option<Histogram>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub diagnostics: BTreeMap<String, f64>,
}

impl DeviationReport {
    /// `max_deviation` is the maximum over `per_case`, or 0 when there are no cases.
    pub fn new(
        label: impl Into<String>,
        params: ReportParams,
        per_case: Vec<CaseDeviation>,
        runtime: Duration,
    ) -> Self {
        let max_deviation = per_case.iter().map(|c| c.deviation).fold(0.0, f64::max);
        Self {
            label: label.into(),
            params,
            per_case,
            max_deviation,
            runtime_ms: runtime.as_millis() as u64,
            histogram: None,
            diagnostics: BTreeMap::new(),
        }
    }

    pub fn with_histogram(mut self, bins: usize) -> Self {
        let values: Vec<f64> = self.per_case.iter().map(|c| c.deviation).collect();
        self.histogram = Some(Histogram::from_values(&values, bins));
        self
    }

    pub fn with_diagnostic(mut self, key: impl Into<String>, value: f64) -> Self {
        self.diagnostics.insert(key.into(), value);
        self
    }
}

/// Summary of a scalar statistic collected over independent trials.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrialStatistics {
    pub label: String,
    pub params: ReportParams,
    pub per_trial: Vec<f64>,
    pub median: f64,
    pub mean: f64,
    pub runtime_ms: u64,
}

impl TrialStatistics {
    pub fn new(label: impl Into<String>, params: ReportParams, per_trial: Vec<f64>, runtime: Duration) -> Self {
        Self {
            label: label.into(),
            params,
            median: median(&per_trial),
            mean: per_trial.iter().sum::<f64>() / per_trial.len().max(1) as f64,
            per_trial,
            runtime_ms: runtime.as_millis() as u64,
        }
    }

    /// Fraction of trials whose statistic is at least `threshold`.
    pub fn fraction_at_least(&self, threshold: f64) -> f64 {
        let hits = self.per_trial.iter().filter(|&&v| v >= threshold).count();
        hits as f64 / self.per_trial.len().max(1) as f64
    }
}

/// Midpoint median; 0 for an empty slice.
pub fn median(values: &[f64]) -> f64 {
    if values.is_empty() {
        return 0.0;
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    if n % 2 == 1 {
        sorted[n / 2]
    } else {
        0.5 * (sorted[n / 2 - 1] + sorted[n / 2])
    }
}

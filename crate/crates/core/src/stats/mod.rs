//! Scalar statistics: logit transform, Glass's Δ, rank and binomial tests,
//! Benjamini–Hochberg adjustment, Cohen's d and normality tests.

mod binomial;
mod mann_whitney;
pub(crate) mod normal;
mod normality;

use serde::{Deserialize, Serialize};

use crate::ingest::Condition;

pub use binomial::binomial_above_chance;
pub use mann_whitney::{mann_whitney_u, mann_whitney_u_with, Alternative, MwMethod};
pub use normality::{dagostino_pearson, lilliefors, normality_tests, shapiro_wilk};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum StatsError {
    #[error("value outside domain: {0}")]
    Domain(String),
    #[error("reference sample has zero or undefined standard deviation")]
    DegenerateReference,
    #[error("pooled standard deviation is zero")]
    DegenerateSample,
    #[error("empty sample")]
    EmptySample,
    #[error("sample too small: need at least {needed}, got {got}")]
    SampleTooSmall { needed: usize, got: usize },
}

/// Result of a hypothesis test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TestResult {
    pub statistic: f64,
    pub p_value: f64,
    pub method: String,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub effect_size: Option<f64>,
}

impl TestResult {
    pub(crate) fn new(method: &str, statistic: f64, p_value: f64) -> Self {
        Self {
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            method: method.to_string(),
            effect_size: None,
        }
    }
}

/// Empirical logit with half pseudo-counts: `ln(a'/(1-a'))`,
/// `a' = (a·n + 0.5)/(n + 1)`. Total on `[0, 1]`.
pub fn empirical_logit(accuracy: f64, n_trials: usize) -> Result<f64, StatsError> {
    if !(0.0..=1.0).contains(&accuracy) {
        return Err(StatsError::Domain(format!("accuracy {accuracy} not in [0,1]")));
    }
    if n_trials == 0 {
        return Err(StatsError::Domain("trial count must be at least 1".into()));
    }
    let n = n_trials as f64;
    let successes = accuracy * n + 0.5;
    let failures = (1.0 - accuracy) * n + 0.5;
    Ok((successes / failures).ln())
}

/// Plain logit; the interior of `[0, 1]` only.
pub fn logit(p: f64) -> Result<f64, StatsError> {
    if !(p > 0.0 && p < 1.0) {
        return Err(StatsError::Domain(format!("logit undefined at {p}")));
    }
    Ok((p / (1.0 - p)).ln())
}

/// Accuracies paired with their logit transforms.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AccuracySample {
    pub values: Vec<f64>,
    pub logits: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub n_trials_per_value: Option<Vec<usize>>,
}

impl AccuracySample {
    /// From (correct, total) counts; logits use the empirical adjustment.
    pub fn from_counts(counts: &[(usize, usize)]) -> Result<Self, StatsError> {
        let mut values = Vec::with_capacity(counts.len());
        let mut logits = Vec::with_capacity(counts.len());
        for &(k, n) in counts {
            if n == 0 || k > n {
                return Err(StatsError::Domain(format!("invalid count {k}/{n}")));
            }
            let a = k as f64 / n as f64;
            values.push(a);
            logits.push(empirical_logit(a, n)?);
        }
        Ok(Self {
            values,
            logits,
            n_trials_per_value: Some(counts.iter().map(|c| c.1).collect()),
        })
    }

    /// From bare accuracies; requires every value strictly inside (0, 1).
    pub fn from_values(values: Vec<f64>) -> Result<Self, StatsError> {
        let logits = values.iter().map(|&a| logit(a)).collect::<Result<_, _>>()?;
        Ok(Self {
            values,
            logits,
            n_trials_per_value: None,
        })
    }

    /// From logits directly; accuracies are recovered through the logistic.
    pub fn from_logits(logits: Vec<f64>) -> Self {
        Self {
            values: logits.iter().map(|l| 1.0 / (1.0 + (-l).exp())).collect(),
            logits,
            n_trials_per_value: None,
        }
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }

    pub fn extend(&mut self, other: &AccuracySample) {
        self.values.extend_from_slice(&other.values);
        self.logits.extend_from_slice(&other.logits);
        match (&mut self.n_trials_per_value, &other.n_trials_per_value) {
            (Some(a), Some(b)) => a.extend_from_slice(b),
            _ => self.n_trials_per_value = None,
        }
    }
}

/// Glass's Δ of one condition against the undistorted reference.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OodScore {
    pub condition: Condition,
    pub delta: f64,
    pub mean_logit_distorted: f64,
    pub reference_mean: f64,
    pub reference_sd: f64,
}

/// Standardizes the mean logit difference by the reference standard
/// deviation (ddof = 1). Negative values mean worse than reference.
pub fn glass_delta(
    condition: Condition,
    distorted: &AccuracySample,
    reference: &AccuracySample,
) -> Result<OodScore, StatsError> {
    if distorted.is_empty() {
        return Err(StatsError::EmptySample);
    }
    if reference.len() < 2 {
        return Err(StatsError::DegenerateReference);
    }
    let reference_mean = mean(&reference.logits);
    let reference_sd = sample_sd(&reference.logits);
    if !(reference_sd > 0.0 && reference_sd.is_finite()) {
        return Err(StatsError::DegenerateReference);
    }
    let mean_logit_distorted = mean(&distorted.logits);
    Ok(OodScore {
        condition,
        delta: (mean_logit_distorted - reference_mean) / reference_sd,
        mean_logit_distorted,
        reference_mean,
        reference_sd,
    })
}

/// Benjamini–Hochberg step-up adjusted p-values, in input order.
pub fn bh_adjust(p_values: &[f64]) -> Result<Vec<f64>, StatsError> {
    if let Some(p) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(StatsError::Domain(format!("p-value {p} not in [0,1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]).then(a.cmp(&b)));
    let mut adjusted = vec![0.0; m];
    let mut running = 1.0_f64;
    for rank in (0..m).rev() {
        let idx = order[rank];
        // ratio first: m/j >= 1 keeps the product >= p under rounding
        let candidate = p_values[idx] * (m as f64 / (rank + 1) as f64);
        running = running.min(candidate);
        adjusted[idx] = running.min(1.0);
    }
    Ok(adjusted)
}

/// Cohen's d with pooled variance weighted by `n_i - 1`.
pub fn cohens_d(a: &[f64], b: &[f64]) -> Result<f64, StatsError> {
    let need = 2;
    for s in [a, b] {
        if s.len() < need {
            return Err(StatsError::SampleTooSmall {
                needed: need,
                got: s.len(),
            });
        }
    }
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let pooled = ((na - 1.0) * sample_var(a) + (nb - 1.0) * sample_var(b)) / (na + nb - 2.0);
    let sd = pooled.sqrt();
    if !(sd > 0.0) {
        return Err(StatsError::DegenerateSample);
    }
    Ok((mean(a) - mean(b)) / sd)
}

pub fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Unbiased sample variance (ddof = 1). NaN for fewer than two values.
pub fn sample_var(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return f64::NAN;
    }
    let m = mean(x);
    x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64
}

pub fn sample_sd(x: &[f64]) -> f64 {
    sample_var(x).sqrt()
}

pub fn median(x: &[f64]) -> f64 {
    if x.is_empty() {
        return f64::NAN;
    }
    let mut v = x.to_vec();
    v.sort_by(f64::total_cmp);
    let n = v.len();
    if n % 2 == 1 {
        v[n / 2]
    } else {
        0.5 * (v[n / 2 - 1] + v[n / 2])
    }
}

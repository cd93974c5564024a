//! The OOD spectrum: per-condition Glass's Δ of human logit accuracy
//! against the pooled undistorted reference, a 1-D Gaussian mixture over
//! those scores, and the resulting ordered regimes.

mod gmm;
mod regimes;

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::config::ReferenceDeclaration;
use crate::ingest::{Condition, ResponseKey, ResponseSet, SystemKind};
use crate::stats::{glass_delta, mean, AccuracySample, OodScore, StatsError};

pub use gmm::{fit_gmm_1d, select_model, Candidate, GmmFit, ModelSelection};
pub use regimes::{assign_regimes, regime_labels, RegimeAssignment, FOUR_REGIMES};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum SpectrumError {
    #[error("too few points: need at least {needed}, got {got}")]
    TooFewPoints { needed: usize, got: usize },
    #[error("data contain non-finite values")]
    NonFinite,
    #[error("component count must be at least 1, got {0}")]
    InvalidK(usize),
    #[error("k range {0}..{1} must lie within 1..8")]
    InvalidKRange(usize, usize),
    #[error("restarts must be at least 1")]
    InvalidRestarts,
    #[error("AICc is undefined for every candidate component count")]
    AiccUndefined,
    #[error("missing reference condition: no human data in any declared reference level")]
    MissingReference,
    #[error(transparent)]
    Stats(#[from] StatsError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpectrumParams {
    pub k_min: usize,
    pub k_max: usize,
    pub seed: u64,
    pub restarts: usize,
}

impl Default for SpectrumParams {
    fn default() -> Self {
        Self {
            k_min: 1,
            k_max: 6,
            seed: 0,
            restarts: 10,
        }
    }
}

/// Per-participant (correct, total) counts of human response sets, by condition.
pub fn human_counts(sets: &BTreeMap<ResponseKey, ResponseSet>) -> BTreeMap<Condition, Vec<(usize, usize)>> {
    let mut out: BTreeMap<Condition, Vec<(usize, usize)>> = BTreeMap::new();
    for s in sets.values().filter(|s| s.system_kind == SystemKind::Human) {
        out.entry(s.condition.clone())
            .or_default()
            .push((s.n_correct(), s.n()));
    }
    out
}

/// Pooled human accuracies over every declared reference condition.
pub fn reference_sample(
    counts: &BTreeMap<Condition, Vec<(usize, usize)>>,
    references: &ReferenceDeclaration,
) -> Result<(Vec<String>, AccuracySample), SpectrumError> {
    let mut ids = Vec::new();
    let mut pooled: Vec<(usize, usize)> = Vec::new();
    for (c, v) in counts.iter().filter(|(c, _)| references.is_reference(c)) {
        ids.push(c.id());
        pooled.extend_from_slice(v);
    }
    if pooled.is_empty() {
        return Err(SpectrumError::MissingReference);
    }
    Ok((ids, AccuracySample::from_counts(&pooled)?))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReferencePool {
    pub conditions: Vec<String>,
    pub n_values: usize,
    pub mean_logit: f64,
    pub sd_logit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ConditionScore {
    pub condition_id: String,
    pub score: OodScore,
    pub is_reference: bool,
    pub n_participants: usize,
    pub mean_accuracy: f64,
    pub regime: String,
    pub posterior: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Spectrum {
    pub reference: ReferencePool,
    pub conditions: Vec<ConditionScore>,
    pub selection: ModelSelection,
    pub fit: GmmFit,
    pub assignment: RegimeAssignment,
    pub params: SpectrumParams,
    pub method: BTreeMap<String, String>,
    pub warnings: Vec<String>,
}

impl Spectrum {
    pub fn scores(&self) -> Vec<OodScore> {
        self.conditions.iter().map(|c| c.score.clone()).collect()
    }

    pub fn regime_of(&self, condition_id: &str) -> Option<&str> {
        self.assignment.assignment.get(condition_id).map(String::as_str)
    }
}

fn method_notes() -> BTreeMap<String, String> {
    [
        ("score", "Glass's delta of mean empirical-logit accuracy vs pooled reference (ddof = 1)"),
        ("initialization", "restart 0 at evenly spaced sample quantiles; other restarts at random quantile levels"),
        ("variance_floor", "1e-6 * range^2 (1e-6 when the range is zero)"),
        ("convergence", "log-likelihood gain < 1e-8 or 500 iterations"),
        ("selection", "minimum BIC; AICc reported, BIC wins on disagreement"),
        ("assignment", "argmax posterior responsibility"),
    ]
    .into_iter()
    .map(|(k, v)| (k.to_string(), v.to_string()))
    .collect()
}

/// Scores every condition with human data, then fits, selects and assigns.
/// Reference conditions are scored and fitted like any other condition.
pub fn build_spectrum(
    sets: &BTreeMap<ResponseKey, ResponseSet>,
    references: &ReferenceDeclaration,
    params: &SpectrumParams,
) -> Result<Spectrum, SpectrumError> {
    let counts = human_counts(sets);
    let (ref_ids, reference) = reference_sample(&counts, references)?;

    let mut scored = Vec::with_capacity(counts.len());
    for (condition, c) in &counts {
        let sample = AccuracySample::from_counts(c)?;
        let score = glass_delta(condition.clone(), &sample, &reference)?;
        scored.push((condition, score, mean(&sample.values), c.len()));
    }
    let deltas: Vec<f64> = scored.iter().map(|s| s.1.delta).collect();
    let selection = select_model(&deltas, params.k_min..=params.k_max, params.seed, params.restarts)?;
    let fit = selection.selected().fit.clone();
    let scores: Vec<OodScore> = scored.iter().map(|s| s.1.clone()).collect();
    let assignment = assign_regimes(&fit, &scores);

    let mut warnings = selection.warnings.clone();
    if !fit.converged {
        warnings.push(format!("EM did not converge within 500 iterations for k = {}", fit.k));
    }
    let conditions = scored
        .into_iter()
        .map(|(condition, score, mean_accuracy, n_participants)| {
            let id = condition.id();
            ConditionScore {
                regime: assignment.assignment[&id].clone(),
                posterior: assignment.responsibilities[&id].clone(),
                is_reference: references.is_reference(condition),
                condition_id: id,
                score,
                n_participants,
                mean_accuracy,
            }
        })
        .collect();
    Ok(Spectrum {
        reference: ReferencePool {
            conditions: ref_ids,
            n_values: reference.len(),
            mean_logit: mean(&reference.logits),
            sd_logit: crate::stats::sample_sd(&reference.logits),
        },
        conditions,
        selection,
        fit,
        assignment,
        params: params.clone(),
        method: method_notes(),
        warnings,
    })
}

//! Synthetic observers with planted accuracy, error tendencies and
//! stimulus-driven coupling, plus a naive re-implementation of the
//! alignment metrics used as a test oracle.
//!
//! Each trial draws a latent uniform `z`. With probability `coupling` the
//! latent is the image's shared value, otherwise a private draw; the trial
//! is correct iff `z < accuracy`. Error labels use the same mixture over a
//! second shared uniform, mapped through the observer's confusion kernel.
//! Marginal accuracy is therefore exactly the configured value, while two
//! observers' correctness is correlated through the shared draw.

mod oracle;

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{CategorySet, Condition, IngestError, SystemKind, TrialRecord, TrialTable, DEFAULT_CATEGORIES};

pub use oracle::{oracle_metrics, OracleMetrics};

#[derive(Debug, thiserror::Error)]
pub enum SynthError {
    #[error("invalid confusion kernel for `{observer}`: {reason}")]
    InvalidKernel { observer: String, reason: String },
    #[error("invalid scenario: {0}")]
    InvalidSpec(String),
    #[error("scenario parse error: {0}")]
    Parse(#[from] toml::de::Error),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// How an observer distributes its errors over wrong classes.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case", deny_unknown_fields)]
pub enum KernelSpec {
    /// Every wrong class equally likely.
    #[default]
    Uniform,
    /// A fraction `strength` of errors goes to class `(truth + offset) mod C`,
    /// the rest uniformly to the other wrong classes.
    FalseLead { strength: f64, offset: usize },
    /// Explicit C×C weights; the diagonal is ignored and rows renormalized.
    Matrix { rows: Vec<Vec<f64>> },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ObserverSpec {
    pub system_id: String,
    #[serde(default = "default_kind")]
    pub kind: SystemKind,
    #[serde(default)]
    pub family: Option<String>,
    #[serde(default)]
    pub subfamily: Option<String>,
    /// Accuracy where neither the condition nor an override sets one.
    #[serde(default = "default_accuracy")]
    pub accuracy: f64,
    /// Logit-scale shift applied to condition accuracies.
    #[serde(default)]
    pub accuracy_shift: f64,
    /// Per condition id; takes precedence over everything else.
    #[serde(default)]
    pub accuracy_by_condition: BTreeMap<String, f64>,
    #[serde(default)]
    pub coupling: f64,
    #[serde(default)]
    pub kernel: KernelSpec,
    /// Seeds this observer's private stream instead of the run seed.
    #[serde(default)]
    pub seed: Option<u64>,
}

fn default_kind() -> SystemKind {
    SystemKind::Human
}

fn default_accuracy() -> f64 {
    0.8
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ConditionSpec {
    pub distortion_type: String,
    pub distortion_level: String,
    #[serde(default)]
    pub accuracy: Option<f64>,
}

impl ConditionSpec {
    pub fn condition(&self) -> Condition {
        Condition::new(&self.distortion_type, &self.distortion_level)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ScenarioSpec {
    #[serde(default = "default_categories")]
    pub categories: Vec<String>,
    pub images_per_condition: usize,
    #[serde(default)]
    pub seed: u64,
    pub conditions: Vec<ConditionSpec>,
    pub observers: Vec<ObserverSpec>,
}

fn default_categories() -> Vec<String> {
    DEFAULT_CATEGORIES.iter().map(|s| s.to_string()).collect()
}

impl ScenarioSpec {
    pub fn from_toml(s: &str) -> Result<Self, SynthError> {
        let spec: ScenarioSpec = toml::from_str(s)?;
        spec.check()?;
        Ok(spec)
    }

    pub fn check(&self) -> Result<(), SynthError> {
        let invalid = |m: String| Err(SynthError::InvalidSpec(m));
        CategorySet::new(self.categories.iter().cloned())?;
        if self.categories.len() < 2 {
            return invalid("at least two categories are required".into());
        }
        if self.images_per_condition == 0 {
            return invalid("images_per_condition must be positive".into());
        }
        if self.conditions.is_empty() || self.observers.is_empty() {
            return invalid("scenario needs at least one condition and one observer".into());
        }
        let ids: BTreeSet<String> = self.conditions.iter().map(|c| c.condition().id()).collect();
        if ids.len() != self.conditions.len() {
            return invalid("duplicate condition".into());
        }
        let unit = |p: f64| (0.0..=1.0).contains(&p);
        for c in &self.conditions {
            if c.accuracy.is_some_and(|a| !unit(a)) {
                return invalid(format!("accuracy of {} outside [0,1]", c.condition().id()));
            }
        }
        let mut seen = BTreeSet::new();
        for o in &self.observers {
            if !seen.insert(&o.system_id) {
                return invalid(format!("duplicate observer `{}`", o.system_id));
            }
            if !unit(o.accuracy) || !unit(o.coupling) || !o.accuracy_shift.is_finite() {
                return invalid(format!("observer `{}`: accuracy and coupling must lie in [0,1]", o.system_id));
            }
            for (cid, &a) in &o.accuracy_by_condition {
                if !ids.contains(cid) || !unit(a) {
                    return invalid(format!("observer `{}`: bad accuracy override for `{cid}`", o.system_id));
                }
            }
            kernel_cdf(o, self.categories.len())?;
        }
        Ok(())
    }

    /// Accuracy of `observer` under `condition`.
    pub fn accuracy(&self, observer: &ObserverSpec, condition: &ConditionSpec) -> f64 {
        if let Some(&a) = observer.accuracy_by_condition.get(&condition.condition().id()) {
            return a;
        }
        let base = condition.accuracy.unwrap_or(observer.accuracy);
        if observer.accuracy_shift == 0.0 || base <= 0.0 || base >= 1.0 {
            return base;
        }
        let l = (base / (1.0 - base)).ln() + observer.accuracy_shift;
        1.0 / (1.0 + (-l).exp())
    }
}

/// Row-wise cumulative error distributions, diagonal excluded.
fn kernel_cdf(o: &ObserverSpec, c: usize) -> Result<Vec<Vec<f64>>, SynthError> {
    let bad = |reason: String| SynthError::InvalidKernel {
        observer: o.system_id.clone(),
        reason,
    };
    let weights: Vec<Vec<f64>> = match &o.kernel {
        KernelSpec::Uniform => (0..c).map(|_| vec![1.0; c]).collect(),
        KernelSpec::FalseLead { strength, offset } => {
            if !(0.0..=1.0).contains(strength) || offset % c == 0 {
                return Err(bad("strength must lie in [0,1] and offset must not map a class to itself".into()));
            }
            let rest = (1.0 - strength) / (c - 1) as f64;
            (0..c)
                .map(|t| {
                    let mut row = vec![rest; c];
                    row[(t + offset) % c] += strength;
                    row
                })
                .collect()
        }
        KernelSpec::Matrix { rows } => rows.clone(),
    };
    if weights.len() != c || weights.iter().any(|r| r.len() != c) {
        return Err(bad(format!("expected a {c}x{c} matrix")));
    }
    weights
        .iter()
        .enumerate()
        .map(|(t, row)| {
            if row.iter().any(|w| !w.is_finite() || *w < 0.0) {
                return Err(bad(format!("row {t} has negative or non-finite weights")));
            }
            let total: f64 = row.iter().enumerate().filter(|(j, _)| *j != t).map(|(_, w)| w).sum();
            if total <= 0.0 {
                return Err(bad(format!("row {t} has no off-diagonal mass")));
            }
            let mut acc = 0.0;
            Ok(row
                .iter()
                .enumerate()
                .map(|(j, w)| {
                    if j != t {
                        acc += w / total;
                    }
                    acc
                })
                .collect())
        })
        .collect()
}

fn draw_error(cdf: &[f64], truth: usize, z: f64) -> usize {
    let last = (0..cdf.len()).rev().find(|&j| j != truth).expect("at least two categories");
    (0..cdf.len())
        .find(|&j| j != truth && z < cdf[j])
        .unwrap_or(last)
}

pub fn image_id(condition: &Condition, i: usize) -> String {
    format!("{}_{i:04}", condition.id())
}

/// Generates every observer's responses to every condition.
///
/// Shared per-image latents come from ChaCha stream 0 of `seed`; observer
/// `i` uses stream `i + 1` of its own seed (or `seed`), so observers can be
/// simulated in parallel with identical results. Image `i` of a condition
/// has true class `i mod C`.
pub fn simulate_observers(spec: &ScenarioSpec, seed: u64) -> Result<TrialTable, SynthError> {
    spec.check()?;
    let categories = CategorySet::new(spec.categories.iter().cloned())?;
    let c = categories.len();
    let n_img = spec.images_per_condition;

    let mut shared_rng = ChaCha8Rng::seed_from_u64(seed);
    shared_rng.set_stream(0);
    let shared: Vec<Vec<(f64, f64)>> = spec
        .conditions
        .iter()
        .map(|_| (0..n_img).map(|_| (shared_rng.random(), shared_rng.random())).collect())
        .collect();

    let per_observer: Vec<Result<Vec<TrialRecord>, SynthError>> = spec
        .observers
        .par_iter()
        .enumerate()
        .map(|(idx, o)| {
            let cdf = kernel_cdf(o, c)?;
            let mut rng = ChaCha8Rng::seed_from_u64(o.seed.unwrap_or(seed));
            rng.set_stream(idx as u64 + 1);
            let mut out = Vec::with_capacity(spec.conditions.len() * n_img);
            for (cs, latents) in spec.conditions.iter().zip(&shared) {
                let cond = cs.condition();
                let acc = spec.accuracy(o, cs);
                for (i, &(u_correct, u_error)) in latents.iter().enumerate() {
                    let [private_c, mix_c, private_e, mix_e]: [f64; 4] = rng.random();
                    let z = if mix_c < o.coupling { u_correct } else { private_c };
                    let truth = i % c;
                    let response = if z < acc {
                        truth
                    } else {
                        let ze = if mix_e < o.coupling { u_error } else { private_e };
                        draw_error(&cdf[truth], truth, ze)
                    };
                    out.push(TrialRecord {
                        system_id: o.system_id.clone(),
                        system_kind: o.kind,
                        family: o.family.clone(),
                        subfamily: o.subfamily.clone(),
                        distortion_type: cond.distortion_type.clone(),
                        distortion_level: cond.distortion_level.clone(),
                        image_id: image_id(&cond, i),
                        true_category: truth,
                        response_category: response,
                        session_id: None,
                        trial_index: Some(i as u64),
                    });
                }
            }
            Ok(out)
        })
        .collect();

    let mut records = Vec::with_capacity(spec.observers.len() * spec.conditions.len() * n_img);
    for r in per_observer {
        records.extend(r?);
    }
    Ok(TrialTable::new(categories, records)?)
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::GmmFit;
use crate::stats::OodScore;

pub const FOUR_REGIMES: [&str; 4] = ["reference", "near-OOD", "far-OOD", "extreme-OOD"];

/// Regime names for a `k`-component fit, in descending-mean order.
pub fn regime_labels(k: usize) -> Vec<String> {
    if k == 4 {
        FOUR_REGIMES.iter().map(|s| s.to_string()).collect()
    } else {
        (1..=k).map(|i| format!("regime_{i}")).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeAssignment {
    /// Regime labels ordered by descending component mean.
    pub regimes: Vec<String>,
    pub component_means: Vec<f64>,
    pub assignment: BTreeMap<String, String>,
    pub responsibilities: BTreeMap<String, Vec<f64>>,
    /// Posterior crossover points between adjacent components, descending.
    pub boundaries: Vec<f64>,
    /// Adjacent component pairs without a crossover between their means.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub missing_boundaries: Vec<(String, String)>,
}

impl RegimeAssignment {
    pub fn regime_index(&self, label: &str) -> Option<usize> {
        self.regimes.iter().position(|r| r == label)
    }
}

fn argmax(v: &[f64]) -> usize {
    let mut best = 0;
    for (i, &x) in v.iter().enumerate() {
        if x > v[best] {
            best = i;
        }
    }
    best
}

/// Point between `means[i+1]` and `means[i]` where the weighted densities
/// of the two components are equal, by bisection.
fn crossover(fit: &GmmFit, i: usize) -> Option<f64> {
    let f = |x: f64| {
        let lj = fit.log_joint(x);
        lj[i] - lj[i + 1]
    };
    let (mut lo, mut hi) = (fit.means[i + 1], fit.means[i]);
    if !(hi > lo) {
        return None;
    }
    let (f_lo, f_hi) = (f(lo), f(hi));
    if !(f_lo < 0.0 && f_hi > 0.0) {
        return None;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if mid <= lo || mid >= hi {
            break;
        }
        if f(mid) > 0.0 {
            hi = mid;
        } else {
            lo = mid;
        }
    }
    Some(0.5 * (lo + hi))
}

/// Posterior responsibilities and hard (argmax) assignment per condition.
pub fn assign_regimes(fit: &GmmFit, scores: &[OodScore]) -> RegimeAssignment {
    let regimes = regime_labels(fit.k);
    let mut assignment = BTreeMap::new();
    let mut responsibilities = BTreeMap::new();
    for s in scores {
        let post = fit.posterior(s.delta);
        let id = s.condition.id();
        assignment.insert(id.clone(), regimes[argmax(&post)].clone());
        responsibilities.insert(id, post);
    }
    let mut boundaries = Vec::new();
    let mut missing_boundaries = Vec::new();
    for i in 0..fit.k.saturating_sub(1) {
        match crossover(fit, i) {
            Some(b) => boundaries.push(b),
            None => missing_boundaries.push((regimes[i].clone(), regimes[i + 1].clone())),
        }
    }
    RegimeAssignment {
        regimes,
        component_means: fit.means.clone(),
        assignment,
        responsibilities,
        boundaries,
        missing_boundaries,
    }
}

use std::cmp::Ordering;
use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::spectrum::RegimeAssignment;
use crate::stats::OodScore;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Representative {
    pub distortion_type: String,
    pub regime: String,
    pub condition_id: String,
    pub delta: f64,
    /// |Δ − component mean| of the chosen condition.
    pub distance: f64,
    /// Another condition was equally close; the lower level token won.
    pub tie: bool,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Representatives {
    pub entries: Vec<Representative>,
    /// Distortion type and regime combinations without any condition.
    pub absent: Vec<(String, String)>,
}

impl Representatives {
    pub fn get(&self, distortion_type: &str, regime: &str) -> Option<&Representative> {
        self.entries
            .iter()
            .find(|r| r.distortion_type == distortion_type && r.regime == regime)
    }

    pub fn in_regime<'a>(&'a self, regime: &'a str) -> impl Iterator<Item = &'a Representative> + 'a {
        self.entries.iter().filter(move |r| r.regime == regime)
    }
}

fn leading_number(s: &str) -> Option<f64> {
    let finite = |v: f64| v.is_finite().then_some(v);
    if let Some(v) = s.parse().ok().and_then(finite) {
        return Some(v);
    }
    let rest = s.trim_start_matches(|c: char| c.is_ascii_alphabetic());
    if rest.is_empty() || rest.len() == s.len() {
        return None;
    }
    rest.parse().ok().and_then(finite)
}

/// Orders level tokens numerically where both parse as numbers (after an
/// optional alphabetic prefix such as `c` in `c50`), lexically otherwise.
pub fn natural_token_cmp(a: &str, b: &str) -> Ordering {
    match (leading_number(a), leading_number(b)) {
        (Some(x), Some(y)) => x.total_cmp(&y).then_with(|| a.cmp(b)),
        _ => a.cmp(b),
    }
}

/// Per (distortion type, regime), the condition whose Δ lies nearest the
/// regime's component mean.
pub fn select_representatives(assignment: &RegimeAssignment, scores: &[OodScore]) -> Representatives {
    let mut cells: BTreeMap<(String, String), Vec<&OodScore>> = BTreeMap::new();
    let types: BTreeSet<&str> = scores.iter().map(|s| s.condition.distortion_type.as_str()).collect();
    for s in scores {
        if let Some(regime) = assignment.assignment.get(&s.condition.id()) {
            cells
                .entry((s.condition.distortion_type.clone(), regime.clone()))
                .or_default()
                .push(s);
        }
    }
    let mut out = Representatives::default();
    for t in &types {
        for (ri, regime) in assignment.regimes.iter().enumerate() {
            let Some(members) = cells.get(&(t.to_string(), regime.clone())) else {
                out.absent.push((t.to_string(), regime.clone()));
                continue;
            };
            let target = assignment.component_means[ri];
            let dist = |s: &OodScore| (s.delta - target).abs();
            let best = members
                .iter()
                .min_by(|a, b| {
                    dist(a)
                        .total_cmp(&dist(b))
                        .then_with(|| natural_token_cmp(&a.condition.distortion_level, &b.condition.distortion_level))
                })
                .expect("cell is non-empty");
            let tie = members
                .iter()
                .filter(|m| dist(m) == dist(best))
                .count()
                > 1;
            out.entries.push(Representative {
                distortion_type: t.to_string(),
                regime: regime.clone(),
                condition_id: best.condition.id(),
                delta: best.delta,
                distance: dist(best),
                tie,
            });
        }
    }
    out
}

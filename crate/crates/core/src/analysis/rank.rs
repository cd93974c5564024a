use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use super::{AlignmentRatio, AnalysisError, Representatives};
use crate::stats::{mann_whitney_u, mean, median, sample_sd, Alternative, TestResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankEntry {
    pub rank: usize,
    pub model_id: String,
    pub family: Option<String>,
    pub mean_rho: f64,
    /// Sample sd across the regime's conditions; absent for one condition.
    pub sd_rho: Option<f64>,
    pub n_conditions: usize,
    /// Shares its mean with a neighbour; order then follows the model id.
    pub tied: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeRanking {
    pub regime: String,
    pub conditions: Vec<String>,
    pub entries: Vec<RankEntry>,
    /// Models without a defined ratio in any of the regime's conditions.
    pub missing_models: Vec<String>,
}

/// Ranks models per regime by the mean ratio over the regime's
/// representative conditions, descending.
pub fn rank_models(
    ratios: &[&AlignmentRatio],
    regimes: &[String],
    representatives: &Representatives,
    families: &BTreeMap<String, String>,
) -> Vec<RegimeRanking> {
    let models: BTreeSet<&str> = ratios.iter().map(|r| r.model_id.as_str()).collect();
    let mut out = Vec::new();
    for regime in regimes {
        let conditions: BTreeSet<&str> = representatives
            .in_regime(regime)
            .map(|r| r.condition_id.as_str())
            .collect();
        if conditions.is_empty() {
            continue;
        }
        let mut per_model: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
        for r in ratios.iter().filter(|r| conditions.contains(r.condition_id.as_str())) {
            per_model.entry(&r.model_id).or_default().push(r.rho);
        }
        let missing_models = models
            .iter()
            .filter(|m| !per_model.contains_key(*m))
            .map(|m| m.to_string())
            .collect();
        let mut entries: Vec<RankEntry> = per_model
            .into_iter()
            .map(|(m, v)| RankEntry {
                rank: 0,
                model_id: m.to_string(),
                family: families.get(m).cloned(),
                mean_rho: mean(&v),
                sd_rho: (v.len() > 1).then(|| sample_sd(&v)),
                n_conditions: v.len(),
                tied: false,
            })
            .collect();
        entries.sort_by(|a, b| b.mean_rho.total_cmp(&a.mean_rho).then_with(|| a.model_id.cmp(&b.model_id)));
        for i in 0..entries.len() {
            entries[i].rank = i + 1;
            let same = |j: usize| entries.get(j).is_some_and(|e: &RankEntry| e.mean_rho == entries[i].mean_rho);
            entries[i].tied = (i > 0 && same(i - 1)) || same(i + 1);
        }
        out.push(RegimeRanking {
            regime: regime.clone(),
            conditions: conditions.into_iter().map(String::from).collect(),
            entries,
            missing_models,
        });
    }
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyComparison {
    /// The family with the higher median.
    pub family_a: String,
    pub family_b: String,
    pub median_a: f64,
    pub median_b: f64,
    pub n_a: usize,
    pub n_b: usize,
    pub test: TestResult,
    /// `>` when p < 0.01 with a higher median, `≥` otherwise.
    pub relation: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTestTable {
    pub comparisons: Vec<FamilyComparison>,
    /// Families with fewer than two models, left out of the table.
    pub excluded: Vec<String>,
}

pub const RANK_TEST_ALPHA: f64 = 0.01;

/// Two-sided Mann–Whitney tests of per-model mean ratios for every pair of
/// families with at least two models.
pub fn superfamily_rank_test(by_family: &BTreeMap<String, Vec<f64>>) -> Result<RankTestTable, AnalysisError> {
    let (eligible, excluded): (Vec<_>, Vec<_>) = by_family.iter().partition(|(_, v)| v.len() >= 2);
    if eligible.len() < 2 {
        return Err(AnalysisError::FamilyTooSmall(excluded.into_iter().map(|(f, _)| f.clone()).collect()));
    }
    let mut comparisons = Vec::new();
    for i in 0..eligible.len() {
        for j in i + 1..eligible.len() {
            let (mut a, mut b) = (eligible[i], eligible[j]);
            if median(b.1) > median(a.1) {
                std::mem::swap(&mut a, &mut b);
            }
            let test = mann_whitney_u(a.1, b.1, Alternative::TwoSided)?;
            let (median_a, median_b) = (median(a.1), median(b.1));
            let relation = if test.p_value < RANK_TEST_ALPHA && median_a > median_b {
                ">"
            } else {
                "≥"
            };
            comparisons.push(FamilyComparison {
                family_a: a.0.clone(),
                family_b: b.0.clone(),
                median_a,
                median_b,
                n_a: a.1.len(),
                n_b: b.1.len(),
                test,
                relation: relation.to_string(),
            });
        }
    }
    Ok(RankTestTable {
        comparisons,
        excluded: excluded.into_iter().map(|(f, _)| f.clone()).collect(),
    })
}

use std::collections::{BTreeMap, BTreeSet};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AnalysisError, DistanceMatrix};
use crate::stats::{cohens_d, mean, sample_sd};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermutationResult {
    pub observed: f64,
    pub null_mean: f64,
    /// Moments of the finite null statistics; the sd is absent for fewer
    /// than two.
    pub null_sd: Option<f64>,
    /// Add-one p: `(1 + #extreme) / (n_permutations + 1)`.
    pub p_value: f64,
    /// `(observed − null_mean) / null_sd`; absent when the null sd is zero.
    pub effect_size: Option<f64>,
    pub n_permutations: usize,
    pub seed: u64,
    /// `greater` counts null ≥ observed, `less` counts null ≤ observed.
    pub tail: String,
    pub n_within: usize,
    pub n_across: usize,
}

/// Group index per matrix entity, with groups numbered in name order.
fn group_indices(dist: &DistanceMatrix, grouping: &BTreeMap<String, String>) -> Result<Vec<usize>, AnalysisError> {
    let names: BTreeSet<&String> = dist
        .labels
        .iter()
        .map(|l| grouping.get(l).ok_or_else(|| AnalysisError::Ungrouped(l.clone())))
        .collect::<Result<_, _>>()?;
    let index: BTreeMap<&String, usize> = names.into_iter().enumerate().map(|(i, n)| (n, i)).collect();
    Ok(dist.labels.iter().map(|l| index[&grouping[l]]).collect())
}

/// Distances split into (within, across) by the given group labels.
fn split(dist: &DistanceMatrix, groups: &[usize]) -> (Vec<f64>, Vec<f64>) {
    let mut within = Vec::new();
    let mut across = Vec::new();
    for i in 0..groups.len() {
        for j in i + 1..groups.len() {
            if groups[i] == groups[j] {
                within.push(dist.get(i, j));
            } else {
                across.push(dist.get(i, j));
            }
        }
    }
    (within, across)
}

fn check_pairs(dist: &DistanceMatrix, groups: &[usize]) -> Result<(usize, usize), AnalysisError> {
    let (w, a) = split(dist, groups);
    if w.is_empty() {
        return Err(AnalysisError::NoWithinPairs);
    }
    if a.is_empty() {
        return Err(AnalysisError::NoAcrossPairs);
    }
    Ok((w.len(), a.len()))
}

/// Statistic under `n_perm` label shuffles. Shuffle `i` uses ChaCha stream
/// `i` of `seed`, so the null is identical however the work is scheduled.
fn null_distribution<F>(groups: &[usize], n_perm: usize, seed: u64, statistic: F) -> Vec<f64>
where
    F: Fn(&[usize]) -> f64 + Sync,
{
    (0..n_perm)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(i as u64);
            let mut g = groups.to_vec();
            g.shuffle(&mut rng);
            statistic(&g)
        })
        .collect()
}

fn summarize(observed: f64, null: &[f64], greater: bool, seed: u64, n_within: usize, n_across: usize) -> PermutationResult {
    let extreme = null
        .iter()
        .filter(|&&v| if greater { v >= observed } else { v <= observed })
        .count();
    let finite: Vec<f64> = null.iter().copied().filter(|v| v.is_finite()).collect();
    let null_mean = mean(&finite);
    let null_sd = (finite.len() > 1).then(|| sample_sd(&finite));
    let effect_size = null_sd.filter(|sd| *sd > 0.0).map(|sd| (observed - null_mean) / sd);
    PermutationResult {
        observed,
        null_mean,
        null_sd,
        p_value: (extreme + 1) as f64 / (null.len() + 1) as f64,
        effect_size,
        n_permutations: null.len(),
        seed,
        tail: if greater { "greater" } else { "less" }.to_string(),
        n_within,
        n_across,
    }
}

/// Tests whether distances across groups exceed distances within groups.
///
/// Statistic: mean(across) − mean(within); null by shuffling group labels;
/// one-tailed (large values are extreme). Singleton groups contribute no
/// within-pairs.
pub fn family_permutation_test(
    dist: &DistanceMatrix,
    grouping: &BTreeMap<String, String>,
    n_perm: usize,
    seed: u64,
) -> Result<PermutationResult, AnalysisError> {
    if n_perm == 0 {
        return Err(AnalysisError::InvalidPermutations);
    }
    let groups = group_indices(dist, grouping)?;
    let (n_within, n_across) = check_pairs(dist, &groups)?;
    let statistic = |g: &[usize]| {
        let (w, a) = split(dist, g);
        mean(&a) - mean(&w)
    };
    let observed = statistic(&groups);
    let null = null_distribution(&groups, n_perm, seed, statistic);
    Ok(summarize(observed, &null, true, seed, n_within, n_across))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Separability {
    /// Cohen's d of within-group minus between-group values; negative
    /// means members of a group are closer to each other.
    pub cohens_d: f64,
    pub within_mean: f64,
    pub between_mean: f64,
    pub permutation: PermutationResult,
}

/// Cohen's d, or NaN for a zero-variance shuffle. NaN never counts as
/// extreme and is left out of the null moments.
fn d_or_nan(w: &[f64], a: &[f64]) -> f64 {
    cohens_d(w, a).unwrap_or(f64::NAN)
}

/// Within- versus between-group separation of a divergence matrix.
/// The permutation test is one-tailed toward more negative d.
pub fn cled_group_separability(
    matrix: &DistanceMatrix,
    grouping: &BTreeMap<String, String>,
    n_perm: usize,
    seed: u64,
) -> Result<Separability, AnalysisError> {
    if n_perm == 0 {
        return Err(AnalysisError::InvalidPermutations);
    }
    let groups = group_indices(matrix, grouping)?;
    let (n_within, n_across) = check_pairs(matrix, &groups)?;
    let (w, a) = split(matrix, &groups);
    let observed = cohens_d(&w, &a)?;
    let null = null_distribution(&groups, n_perm, seed, |g| {
        let (w, a) = split(matrix, g);
        d_or_nan(&w, &a)
    });
    Ok(Separability {
        cohens_d: observed,
        within_mean: mean(&w),
        between_mean: mean(&a),
        permutation: summarize(observed, &null, false, seed, n_within, n_across),
    })
}

//! Aggregate analyses over metric cells: pairwise alignment, human-normalized
//! alignment ratios and rankings, alignment-vector distances, label
//! permutation tests and representative-condition selection.

mod alignment;
mod permutation;
mod rank;
mod ratio;
mod representatives;
mod vectors;

use serde::{Deserialize, Serialize};

use crate::metrics::MetricError;
use crate::stats::StatsError;

pub use alignment::{metric_cells, pairwise_alignment, AlignmentRecord, AlignmentTable, MetricCell, PairKind};
pub use permutation::{cled_group_separability, family_permutation_test, PermutationResult, Separability};
pub use rank::{rank_models, superfamily_rank_test, FamilyComparison, RankEntry, RegimeRanking, RankTestTable};
pub use ratio::{alignment_ratio, all_ratios, AlignmentRatio, RatioFailure, RatioMetric, RatioTable};
pub use representatives::{natural_token_cmp, select_representatives, Representative, Representatives};
pub use vectors::{alignment_vectors, AlignmentVectors};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum AnalysisError {
    #[error("no within-group pairs: every group has a single member")]
    NoWithinPairs,
    #[error("no across-group pairs: all entities share one group")]
    NoAcrossPairs,
    #[error("entity `{0}` has no group assignment")]
    Ungrouped(String),
    #[error("human-human baseline is zero in condition {0}")]
    ZeroHumanBaseline(String),
    #[error("no defined {what} cells in condition {condition}")]
    NoDefinedCells { what: String, condition: String },
    #[error("fewer than two families with at least two models (too small: {0:?})")]
    FamilyTooSmall(Vec<String>),
    #[error("alignment vectors need a non-empty condition roster")]
    EmptyRoster,
    #[error("invalid distance matrix: {0}")]
    InvalidMatrix(String),
    #[error("number of permutations must be positive")]
    InvalidPermutations,
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error(transparent)]
    Stats(#[from] StatsError),
}

/// Symmetric, nonnegative matrix with zero diagonal over labelled entities.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DistanceMatrix {
    pub labels: Vec<String>,
    pub values: Vec<Vec<f64>>,
}

impl DistanceMatrix {
    pub fn new(labels: Vec<String>, values: Vec<Vec<f64>>) -> Result<Self, AnalysisError> {
        let n = labels.len();
        let bad = |m: String| Err(AnalysisError::InvalidMatrix(m));
        if values.len() != n || values.iter().any(|r| r.len() != n) {
            return bad(format!("expected {n}x{n} values"));
        }
        for i in 0..n {
            if values[i][i] != 0.0 {
                return bad(format!("nonzero diagonal at {}", labels[i]));
            }
            for j in 0..n {
                let v = values[i][j];
                if !(v.is_finite() && v >= 0.0) || v != values[j][i] {
                    return bad(format!("entry ({i},{j}) is negative, non-finite or asymmetric"));
                }
            }
        }
        Ok(Self { labels, values })
    }

    /// Builds a matrix from a symmetric pairwise function evaluated on i < j.
    pub fn from_fn<F>(labels: Vec<String>, mut f: F) -> Result<Self, AnalysisError>
    where
        F: FnMut(usize, usize) -> f64,
    {
        let n = labels.len();
        let mut values = vec![vec![0.0; n]; n];
        for i in 0..n {
            for j in i + 1..n {
                let v = f(i, j);
                values[i][j] = v;
                values[j][i] = v;
            }
        }
        Self::new(labels, values)
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i][j]
    }
}

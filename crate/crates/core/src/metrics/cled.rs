use serde::{Deserialize, Serialize};

use super::{MetricError, MetricValue, UndefinedReason};
use crate::ingest::ResponseSet;

/// Error confusion counts of one system: row = true class, column =
/// predicted class, correct predictions excluded (zero diagonal).
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ErrorConfusion {
    pub n_categories: usize,
    /// Row-major C×C.
    pub matrix: Vec<u64>,
    /// Errors per true class (row sums).
    pub class_errors: Vec<u64>,
}

impl ErrorConfusion {
    pub fn zeros(n_categories: usize) -> Self {
        Self {
            n_categories,
            matrix: vec![0; n_categories * n_categories],
            class_errors: vec![0; n_categories],
        }
    }

    pub fn add_error(&mut self, truth: usize, response: usize) {
        debug_assert_ne!(truth, response);
        self.matrix[truth * self.n_categories + response] += 1;
        self.class_errors[truth] += 1;
    }

    pub fn row(&self, class: usize) -> &[u64] {
        &self.matrix[class * self.n_categories..(class + 1) * self.n_categories]
    }

    pub fn total_errors(&self) -> u64 {
        self.class_errors.iter().sum()
    }

    /// Element-wise sum, used to pool several systems' errors.
    pub fn merge(&mut self, other: &ErrorConfusion) {
        assert_eq!(self.n_categories, other.n_categories);
        for (a, b) in self.matrix.iter_mut().zip(&other.matrix) {
            *a += b;
        }
        for (a, b) in self.class_errors.iter_mut().zip(&other.class_errors) {
            *a += b;
        }
    }
}

pub fn error_confusion(set: &ResponseSet) -> ErrorConfusion {
    let mut f = ErrorConfusion::zeros(set.n_categories);
    for t in set.trials.iter().filter(|t| !t.is_correct()) {
        f.add_error(t.truth, t.response);
    }
    f
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CledResult {
    pub cled: MetricValue,
    pub per_class_jsd: Vec<f64>,
    pub weights: Vec<f64>,
    pub alpha: f64,
}

/// Jensen–Shannon divergence with base-2 logarithms, bounded in [0, 1].
pub fn jsd_base2(p: &[f64], q: &[f64]) -> f64 {
    let kl_to_mid = |x: &[f64], y: &[f64]| -> f64 {
        x.iter()
            .zip(y)
            .map(|(&xi, &yi)| {
                let mi = 0.5 * (xi + yi);
                if xi > 0.0 {
                    xi * (xi / mi).log2()
                } else {
                    0.0
                }
            })
            .sum()
    };
    let j = 0.5 * kl_to_mid(p, q) + 0.5 * kl_to_mid(q, p);
    j.clamp(0.0, 1.0)
}

fn smoothed(row: &[u64], alpha: f64) -> Vec<f64> {
    let total: f64 = row.iter().map(|&f| f as f64 + alpha).sum();
    row.iter().map(|&f| (f as f64 + alpha) / total).collect()
}

/// Class-level error divergence with a symmetric Dirichlet prior `alpha`.
///
/// Classes without errors in either system get weight zero.
pub fn cled(a: &ErrorConfusion, b: &ErrorConfusion, alpha: f64) -> Result<CledResult, MetricError> {
    if a.n_categories != b.n_categories {
        return Err(MetricError::DimensionMismatch(a.n_categories, b.n_categories));
    }
    if !(alpha > 0.0 && alpha.is_finite()) {
        return Err(MetricError::InvalidAlpha(alpha));
    }
    let c = a.n_categories;
    let per_class_jsd: Vec<f64> = (0..c)
        .map(|i| jsd_base2(&smoothed(a.row(i), alpha), &smoothed(b.row(i), alpha)))
        .collect();
    let total = (a.total_errors() + b.total_errors()) as f64;
    if total == 0.0 {
        return Ok(CledResult {
            cled: MetricValue::Undefined(UndefinedReason::NoErrors),
            per_class_jsd,
            weights: vec![0.0; c],
            alpha,
        });
    }
    let weights: Vec<f64> = (0..c)
        .map(|i| (a.class_errors[i] + b.class_errors[i]) as f64 / total)
        .collect();
    let value: f64 = weights.iter().zip(&per_class_jsd).map(|(w, j)| w * j).sum();
    Ok(CledResult {
        cled: MetricValue::Defined(value.clamp(0.0, 1.0)),
        per_class_jsd,
        weights,
        alpha,
    })
}

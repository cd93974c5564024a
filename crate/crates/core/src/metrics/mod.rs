//! Pairwise error-alignment metrics between two classification systems.
//!
//! * Error Consistency (EC): Cohen's kappa on trial-level correctness.
//! * Misclassification Agreement (MA): multiclass kappa over the predicted
//!   labels of jointly misclassified trials.
//! * Class-Level Error Divergence (CLED): error-weighted Jensen–Shannon
//!   divergence between Dirichlet-smoothed per-class error distributions.
//!
//! EC and MA need trial-level correspondence (comparable response sets);
//! CLED only needs each system's error confusion matrix.
//!
//! Degenerate inputs produce [`MetricValue::Undefined`], never NaN.

mod cled;
mod kappa;

use serde::{Deserialize, Serialize};

pub use cled::{cled, error_confusion, jsd_base2, CledResult, ErrorConfusion};
pub use kappa::{error_consistency, misclassification_agreement, EcBreakdown, MaBreakdown};

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum MetricError {
    #[error("response sets do not cover the same stimuli")]
    NonComparable,
    #[error("response set is empty")]
    Empty,
    #[error("category dimensions differ ({0} vs {1})")]
    DimensionMismatch(usize, usize),
    #[error("prior concentration must be positive and finite, got {0}")]
    InvalidAlpha(f64),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum UndefinedReason {
    /// Chance agreement is 1; kappa has a zero denominator.
    DegenerateExpectation,
    NoJointErrors,
    NoErrors,
}

impl UndefinedReason {
    pub fn as_str(self) -> &'static str {
        match self {
            UndefinedReason::DegenerateExpectation => "degenerate_expectation",
            UndefinedReason::NoJointErrors => "no_joint_errors",
            UndefinedReason::NoErrors => "no_errors",
        }
    }
}

/// A metric outcome that may be undefined for degenerate inputs.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MetricValue {
    Defined(f64),
    Undefined(UndefinedReason),
}

impl MetricValue {
    pub fn value(self) -> Option<f64> {
        match self {
            MetricValue::Defined(v) => Some(v),
            MetricValue::Undefined(_) => None,
        }
    }

    pub fn is_defined(self) -> bool {
        matches!(self, MetricValue::Defined(_))
    }
}

/// Chance-corrected agreement `(observed - expected) / (1 - expected)`.
pub(crate) fn kappa(observed: f64, expected: f64) -> MetricValue {
    if expected >= 1.0 {
        MetricValue::Undefined(UndefinedReason::DegenerateExpectation)
    } else {
        MetricValue::Defined((observed - expected) / (1.0 - expected))
    }
}

use serde::{Deserialize, Serialize};

use super::{kappa, MetricError, MetricValue, UndefinedReason};
use crate::ingest::ResponseSet;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EcBreakdown {
    pub n: usize,
    /// Jointly correct trials.
    pub n_c: usize,
    /// Jointly incorrect trials, whatever the predicted labels.
    pub n_e: usize,
    pub p_a: f64,
    pub p_b: f64,
    pub p_obs: f64,
    pub p_exp: f64,
    pub ec: MetricValue,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MaBreakdown {
    pub n_err: usize,
    pub n_categories: usize,
    /// Row-major C×C counts: row = prediction of A, column = prediction of B.
    pub agreement_matrix: Vec<u64>,
    pub p_o_tilde: Option<f64>,
    pub p_e_tilde: Option<f64>,
    pub ma: MetricValue,
}

fn check_pair(a: &ResponseSet, b: &ResponseSet) -> Result<(), MetricError> {
    if a.n() == 0 || b.n() == 0 {
        return Err(MetricError::Empty);
    }
    if a.n_categories != b.n_categories {
        return Err(MetricError::DimensionMismatch(a.n_categories, b.n_categories));
    }
    if !a.is_comparable(b) {
        return Err(MetricError::NonComparable);
    }
    Ok(())
}

pub fn error_consistency(a: &ResponseSet, b: &ResponseSet) -> Result<EcBreakdown, MetricError> {
    check_pair(a, b)?;
    let n = a.n();
    let (mut n_c, mut n_e, mut correct_a, mut correct_b) = (0, 0, 0, 0);
    for (ta, tb) in a.trials.iter().zip(&b.trials) {
        let (ca, cb) = (ta.is_correct(), tb.is_correct());
        correct_a += usize::from(ca);
        correct_b += usize::from(cb);
        match (ca, cb) {
            (true, true) => n_c += 1,
            (false, false) => n_e += 1,
            _ => {}
        }
    }
    let nf = n as f64;
    let p_a = correct_a as f64 / nf;
    let p_b = correct_b as f64 / nf;
    let p_obs = (n_c + n_e) as f64 / nf;
    let p_exp = p_a * p_b + (1.0 - p_a) * (1.0 - p_b);
    Ok(EcBreakdown {
        n,
        n_c,
        n_e,
        p_a,
        p_b,
        p_obs,
        p_exp,
        ec: kappa(p_obs, p_exp),
    })
}

pub fn misclassification_agreement(a: &ResponseSet, b: &ResponseSet) -> Result<MaBreakdown, MetricError> {
    check_pair(a, b)?;
    let c = a.n_categories;
    let mut matrix = vec![0u64; c * c];
    let mut n_err = 0usize;
    for (ta, tb) in a.trials.iter().zip(&b.trials) {
        if !ta.is_correct() && !tb.is_correct() {
            matrix[ta.response * c + tb.response] += 1;
            n_err += 1;
        }
    }
    if n_err == 0 {
        return Ok(MaBreakdown {
            n_err,
            n_categories: c,
            agreement_matrix: matrix,
            p_o_tilde: None,
            p_e_tilde: None,
            ma: MetricValue::Undefined(UndefinedReason::NoJointErrors),
        });
    }
    let nf = n_err as f64;
    let trace: u64 = (0..c).map(|i| matrix[i * c + i]).sum();
    let p_o = trace as f64 / nf;
    let p_e: f64 = (0..c)
        .map(|i| {
            let row: u64 = matrix[i * c..(i + 1) * c].iter().sum();
            let col: u64 = (0..c).map(|j| matrix[j * c + i]).sum();
            (row as f64 / nf) * (col as f64 / nf)
        })
        .sum();
    Ok(MaBreakdown {
        n_err,
        n_categories: c,
        agreement_matrix: matrix,
        p_o_tilde: Some(p_o),
        p_e_tilde: Some(p_e),
        ma: kappa(p_o, p_e),
    })
}

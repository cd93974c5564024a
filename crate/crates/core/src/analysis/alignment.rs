use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::AnalysisError;
use crate::ingest::{Condition, ResponseSet, SystemKind};
use crate::metrics::{cled, error_confusion, error_consistency, misclassification_agreement, MetricValue};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PairKind {
    HumanHuman,
    HumanModel,
    ModelModel,
}

impl PairKind {
    pub fn of(a: SystemKind, b: SystemKind) -> Self {
        match (a, b) {
            (SystemKind::Human, SystemKind::Human) => PairKind::HumanHuman,
            (SystemKind::Model, SystemKind::Model) => PairKind::ModelModel,
            _ => PairKind::HumanModel,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            PairKind::HumanHuman => "hh",
            PairKind::HumanModel => "hm",
            PairKind::ModelModel => "mm",
        }
    }
}

/// EC and MA of one unordered system pair in one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRecord {
    pub condition: Condition,
    pub system_a: String,
    pub system_b: String,
    pub kind: PairKind,
    pub kind_a: SystemKind,
    pub kind_b: SystemKind,
    pub ec: MetricValue,
    pub ma: MetricValue,
    pub n: usize,
    pub n_joint_errors: usize,
}

impl AlignmentRecord {
    /// The model of a human–model pair.
    pub fn model_side(&self) -> Option<&str> {
        match (self.kind_a, self.kind_b) {
            (SystemKind::Model, SystemKind::Human) => Some(&self.system_a),
            (SystemKind::Human, SystemKind::Model) => Some(&self.system_b),
            _ => None,
        }
    }

    /// The partner of `system` in this pair, if `system` takes part.
    pub fn partner_of(&self, system: &str) -> Option<&str> {
        if self.system_a == system {
            Some(&self.system_b)
        } else if self.system_b == system {
            Some(&self.system_a)
        } else {
            None
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentTable {
    pub records: Vec<AlignmentRecord>,
    /// Pairs skipped because their stimulus sets differ.
    pub skipped_non_comparable: Vec<(String, String)>,
    /// Pairs dropped because both EC and MA were undefined.
    pub fully_undefined: usize,
}

fn sorted<'a>(sets: &[&'a ResponseSet]) -> Vec<&'a ResponseSet> {
    let mut v = sets.to_vec();
    v.sort_by(|a, b| a.system_id.cmp(&b.system_id));
    v
}

fn pairs(n: usize) -> Vec<(usize, usize)> {
    (0..n).flat_map(|i| (i + 1..n).map(move |j| (i, j))).collect()
}

/// EC and MA for every unordered pair of systems in one condition.
///
/// Pairs are ordered by system id (`system_a < system_b`).
pub fn pairwise_alignment(sets: &[&ResponseSet]) -> Result<AlignmentTable, AnalysisError> {
    let sets = sorted(sets);
    let results: Vec<Option<AlignmentRecord>> = pairs(sets.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (a, b) = (sets[i], sets[j]);
            if !a.is_comparable(b) {
                return Ok(None);
            }
            let ec = error_consistency(a, b)?;
            let ma = misclassification_agreement(a, b)?;
            Ok(Some(AlignmentRecord {
                condition: a.condition.clone(),
                system_a: a.system_id.clone(),
                system_b: b.system_id.clone(),
                kind: PairKind::of(a.system_kind, b.system_kind),
                kind_a: a.system_kind,
                kind_b: b.system_kind,
                ec: ec.ec,
                ma: ma.ma,
                n: ec.n,
                n_joint_errors: ma.n_err,
            }))
        })
        .collect::<Result<_, AnalysisError>>()?;

    let mut table = AlignmentTable {
        records: Vec::new(),
        skipped_non_comparable: Vec::new(),
        fully_undefined: 0,
    };
    for ((i, j), r) in pairs(sets.len()).into_iter().zip(results) {
        match r {
            None => table
                .skipped_non_comparable
                .push((sets[i].system_id.clone(), sets[j].system_id.clone())),
            Some(r) if !r.ec.is_defined() && !r.ma.is_defined() => table.fully_undefined += 1,
            Some(r) => table.records.push(r),
        }
    }
    Ok(table)
}

/// One row of the flat metric dump.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricCell {
    pub condition_id: String,
    pub system_a: String,
    pub system_b: String,
    pub metric: String,
    pub value: Option<f64>,
    pub defined: bool,
    /// Trials for EC, joint errors for MA, pooled errors for CLED.
    pub n_basis: u64,
}

impl MetricCell {
    fn new(condition_id: &str, a: &str, b: &str, metric: &str, value: MetricValue, n_basis: u64) -> Self {
        Self {
            condition_id: condition_id.to_string(),
            system_a: a.to_string(),
            system_b: b.to_string(),
            metric: metric.to_string(),
            value: value.value(),
            defined: value.is_defined(),
            n_basis,
        }
    }
}

/// EC, MA and CLED cells for every pair in one condition. CLED does not
/// need trial correspondence and is emitted for non-comparable pairs too.
pub fn metric_cells(sets: &[&ResponseSet], alpha: f64) -> Result<Vec<MetricCell>, AnalysisError> {
    let sets = sorted(sets);
    let confusions: Vec<_> = sets.iter().map(|s| error_confusion(s)).collect();
    let cells: Vec<Vec<MetricCell>> = pairs(sets.len())
        .into_par_iter()
        .map(|(i, j)| {
            let (a, b) = (sets[i], sets[j]);
            let cid = a.condition.id();
            let mut out = Vec::with_capacity(3);
            if a.is_comparable(b) {
                let ec = error_consistency(a, b)?;
                let ma = misclassification_agreement(a, b)?;
                out.push(MetricCell::new(&cid, &a.system_id, &b.system_id, "ec", ec.ec, ec.n as u64));
                out.push(MetricCell::new(&cid, &a.system_id, &b.system_id, "ma", ma.ma, ma.n_err as u64));
            }
            let c = cled(&confusions[i], &confusions[j], alpha)?;
            let basis = confusions[i].total_errors() + confusions[j].total_errors();
            out.push(MetricCell::new(&cid, &a.system_id, &b.system_id, "cled", c.cled, basis));
            Ok(out)
        })
        .collect::<Result<_, AnalysisError>>()?;
    Ok(cells.into_iter().flatten().collect())
}

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AlignmentRecord, AnalysisError, PairKind};
use crate::metrics::MetricValue;
use crate::stats::mean;

/// Which per-pair alignment value a ratio is built from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RatioMetric {
    /// `(EC + MA) / 2`, defined only when both are.
    Combined,
    Ec,
    Ma,
}

impl RatioMetric {
    pub const ALL: [RatioMetric; 3] = [RatioMetric::Combined, RatioMetric::Ec, RatioMetric::Ma];

    pub fn as_str(self) -> &'static str {
        match self {
            RatioMetric::Combined => "combined",
            RatioMetric::Ec => "ec",
            RatioMetric::Ma => "ma",
        }
    }

    pub fn cell(self, r: &AlignmentRecord) -> Option<f64> {
        match self {
            RatioMetric::Combined => match (r.ec, r.ma) {
                (MetricValue::Defined(e), MetricValue::Defined(m)) => Some(0.5 * (e + m)),
                _ => None,
            },
            RatioMetric::Ec => r.ec.value(),
            RatioMetric::Ma => r.ma.value(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentRatio {
    pub model_id: String,
    pub condition_id: String,
    pub metric: RatioMetric,
    pub rho: f64,
    pub a_model: f64,
    pub a_human: f64,
    pub n_model_cells: usize,
    pub n_model_excluded: usize,
    pub n_human_cells: usize,
    pub n_human_excluded: usize,
}

fn defined_mean(
    records: &[&AlignmentRecord],
    metric: RatioMetric,
    what: &str,
    condition_id: &str,
) -> Result<(f64, usize, usize), AnalysisError> {
    let vals: Vec<f64> = records.iter().filter_map(|r| metric.cell(r)).collect();
    if vals.is_empty() {
        return Err(AnalysisError::NoDefinedCells {
            what: what.to_string(),
            condition: condition_id.to_string(),
        });
    }
    Ok((mean(&vals), vals.len(), records.len() - vals.len()))
}

/// Ratio of a model's mean alignment with human partners to the mean
/// human–human alignment in the same condition. Undefined cells are
/// excluded from both means and counted.
pub fn alignment_ratio(
    model_id: &str,
    condition_id: &str,
    model_records: &[&AlignmentRecord],
    human_records: &[&AlignmentRecord],
    metric: RatioMetric,
) -> Result<AlignmentRatio, AnalysisError> {
    let (a_human, n_human_cells, n_human_excluded) = defined_mean(human_records, metric, "human-human", condition_id)?;
    if a_human == 0.0 {
        return Err(AnalysisError::ZeroHumanBaseline(condition_id.to_string()));
    }
    let (a_model, n_model_cells, n_model_excluded) = defined_mean(model_records, metric, "model-human", condition_id)?;
    Ok(AlignmentRatio {
        model_id: model_id.to_string(),
        condition_id: condition_id.to_string(),
        metric,
        rho: a_model / a_human,
        a_model,
        a_human,
        n_model_cells,
        n_model_excluded,
        n_human_cells,
        n_human_excluded,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RatioFailure {
    pub model_id: String,
    pub condition_id: String,
    pub metric: RatioMetric,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RatioTable {
    pub ratios: Vec<AlignmentRatio>,
    pub failures: Vec<RatioFailure>,
}

impl RatioTable {
    pub fn for_metric(&self, metric: RatioMetric) -> impl Iterator<Item = &AlignmentRatio> {
        self.ratios.iter().filter(move |r| r.metric == metric)
    }
}

/// Every (model, condition, metric) ratio derivable from the records.
/// Models are the model-side systems of human–model pairs.
pub fn all_ratios(records: &[AlignmentRecord]) -> RatioTable {
    let mut by_condition: BTreeMap<String, Vec<&AlignmentRecord>> = BTreeMap::new();
    for r in records {
        by_condition.entry(r.condition.id()).or_default().push(r);
    }
    let mut table = RatioTable::default();
    for (cid, recs) in by_condition {
        let humans: Vec<&AlignmentRecord> = recs.iter().copied().filter(|r| r.kind == PairKind::HumanHuman).collect();
        let mut per_model: BTreeMap<&str, Vec<&AlignmentRecord>> = BTreeMap::new();
        for r in recs.iter() {
            if let Some(model) = r.model_side() {
                per_model.entry(model).or_default().push(r);
            }
        }
        for (model, mrecs) in per_model {
            for metric in RatioMetric::ALL {
                match alignment_ratio(model, &cid, &mrecs, &humans, metric) {
                    Ok(r) => table.ratios.push(r),
                    Err(e) => table.failures.push(RatioFailure {
                        model_id: model.to_string(),
                        condition_id: cid.clone(),
                        metric,
                        reason: e.to_string(),
                    }),
                }
            }
        }
    }
    table
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::collections::BTreeSet;

    use crate::ingest::{Condition, SystemKind};
    use crate::metrics::UndefinedReason;

    pub(crate) fn rec(a: &str, b: &str, kind: PairKind, ec: Option<f64>, ma: Option<f64>) -> AlignmentRecord {
        let v = |x: Option<f64>| x.map_or(MetricValue::Undefined(UndefinedReason::NoJointErrors), MetricValue::Defined);
        let k = |s: &str| if s.starts_with('h') { SystemKind::Human } else { SystemKind::Model };
        AlignmentRecord {
            kind_a: k(a),
            kind_b: k(b),
            condition: Condition::new("c", "1"),
            system_a: a.into(),
            system_b: b.into(),
            kind,
            ec: v(ec),
            ma: v(ma),
            n: 10,
            n_joint_errors: 2,
        }
    }

    #[test]
    fn ratio_arithmetic() {
        let h = rec("h1", "h2", PairKind::HumanHuman, Some(0.6), Some(0.6));
        let m = rec("h1", "m", PairKind::HumanModel, Some(0.3), Some(0.3));
        let r = alignment_ratio("m", "c_1", &[&m], &[&h], RatioMetric::Combined).unwrap();
        assert!((r.rho - 0.5).abs() < 1e-15);
        let r = alignment_ratio("m", "c_1", &[&h], &[&h], RatioMetric::Ec).unwrap();
        assert_eq!(r.rho, 1.0);
    }

    #[test]
    fn undefined_cells_are_excluded_and_counted() {
        let h1 = rec("h1", "h2", PairKind::HumanHuman, Some(0.4), Some(0.2));
        let h2 = rec("h1", "h3", PairKind::HumanHuman, Some(0.5), None);
        let m = rec("h1", "m", PairKind::HumanModel, Some(0.1), Some(0.1));
        let r = alignment_ratio("m", "c_1", &[&m], &[&h1, &h2], RatioMetric::Combined).unwrap();
        assert_eq!((r.n_human_cells, r.n_human_excluded), (1, 1));
        assert!((r.a_human - 0.3).abs() < 1e-15);
        let r = alignment_ratio("m", "c_1", &[&m], &[&h1, &h2], RatioMetric::Ec).unwrap();
        assert!((r.a_human - 0.45).abs() < 1e-15);
    }

    #[test]
    fn error_cases() {
        let h = rec("h1", "h2", PairKind::HumanHuman, Some(0.0), Some(0.0));
        let m = rec("h1", "m", PairKind::HumanModel, Some(0.3), Some(0.3));
        assert_eq!(
            alignment_ratio("m", "c_1", &[&m], &[&h], RatioMetric::Combined),
            Err(AnalysisError::ZeroHumanBaseline("c_1".into()))
        );
        let h = rec("h1", "h2", PairKind::HumanHuman, Some(0.5), None);
        assert!(matches!(
            alignment_ratio("m", "c_1", &[&m], &[&h], RatioMetric::Ma),
            Err(AnalysisError::NoDefinedCells { .. })
        ));
    }

    #[test]
    fn all_ratios_finds_model_side() {
        let recs = vec![
            rec("h1", "h2", PairKind::HumanHuman, Some(0.5), Some(0.5)),
            rec("h1", "zz", PairKind::HumanModel, Some(0.25), Some(0.25)),
            rec("aa", "h2", PairKind::HumanModel, Some(0.5), Some(0.5)),
        ];
        let t = all_ratios(&recs);
        let ids: BTreeSet<&str> = t.ratios.iter().map(|r| r.model_id.as_str()).collect();
        assert_eq!(ids, BTreeSet::from(["aa", "zz"]));
        assert_eq!(t.ratios.len(), 6);
    }
}

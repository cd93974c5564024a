use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{build_response_sets, SystemKind, TrialTable};
use crate::config::ReferenceDeclaration;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warning,
    Error,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Finding {
    pub severity: Severity,
    pub code: String,
    pub message: String,
}

impl Finding {
    fn new(severity: Severity, code: &str, message: String) -> Self {
        Self {
            severity,
            code: code.to_string(),
            message,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConditionSummary {
    pub condition_id: String,
    pub humans: Vec<String>,
    pub models: Vec<String>,
    pub n_trials: usize,
    /// Number of distinct stimulus sets among the systems in this condition.
    pub stimulus_sets: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ReferenceCoverage {
    /// Declared reference level, or `None` for pooled-only types.
    pub declared_level: Option<String>,
    pub pooled: bool,
    pub present: bool,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub n_trials: usize,
    pub conditions: Vec<ConditionSummary>,
    pub reference_coverage: BTreeMap<String, ReferenceCoverage>,
    pub findings: Vec<Finding>,
}

impl ValidationReport {
    pub fn errors(&self) -> impl Iterator<Item = &Finding> {
        self.findings.iter().filter(|f| f.severity == Severity::Error)
    }

    pub fn has_errors(&self) -> bool {
        self.errors().next().is_some()
    }
}

pub fn validate(table: &TrialTable, references: &ReferenceDeclaration) -> ValidationReport {
    let sets = build_response_sets(table);
    let mut findings = Vec::new();

    let mut by_condition: BTreeMap<String, Vec<_>> = BTreeMap::new();
    for ((_, cond), set) in &sets {
        by_condition.entry(cond.clone()).or_default().push(set);
    }

    let mut conditions = Vec::with_capacity(by_condition.len());
    for (cond, members) in &by_condition {
        let mut classes: Vec<&super::ResponseSet> = Vec::new();
        for s in members {
            if !classes.iter().any(|c| c.is_comparable(s)) {
                classes.push(s);
            }
        }
        if classes.len() > 1 {
            findings.push(Finding::new(
                Severity::Warning,
                "non_comparable_stimuli",
                format!(
                    "non-comparable stimulus sets in {cond}: {} distinct sets among {} systems",
                    classes.len(),
                    members.len()
                ),
            ));
        }
        let humans: Vec<String> = members
            .iter()
            .filter(|s| s.system_kind == SystemKind::Human)
            .map(|s| s.system_id.clone())
            .collect();
        if humans.is_empty() {
            findings.push(Finding::new(
                Severity::Warning,
                "no_human_data",
                format!("condition {cond} has no human responses"),
            ));
        }
        conditions.push(ConditionSummary {
            condition_id: cond.clone(),
            models: members
                .iter()
                .filter(|s| s.system_kind == SystemKind::Model)
                .map(|s| s.system_id.clone())
                .collect(),
            humans,
            n_trials: members.iter().map(|s| s.n()).sum(),
            stimulus_sets: classes.len(),
        });
    }

    let mut reference_coverage = BTreeMap::new();
    let mut any_reference = false;
    let types: std::collections::BTreeSet<String> = table
        .records()
        .iter()
        .map(|r| r.distortion_type.clone())
        .collect();
    for t in &types {
        let level = references.levels.get(t).cloned();
        let pooled = references.pooled.iter().any(|p| p == t);
        let present = level.as_ref().is_some_and(|l| {
            table
                .records()
                .iter()
                .any(|r| &r.distortion_type == t && &r.distortion_level == l)
        });
        any_reference |= present;
        if level.is_none() && !pooled {
            findings.push(Finding::new(
                Severity::Error,
                "missing_reference",
                format!("missing reference condition for distortion type {t}"),
            ));
        } else if level.is_some() && !present {
            findings.push(Finding::new(
                Severity::Warning,
                "reference_absent",
                format!(
                    "declared reference level {}_{} not present in data",
                    t,
                    level.as_deref().unwrap_or_default()
                ),
            ));
        }
        reference_coverage.insert(
            t.clone(),
            ReferenceCoverage {
                declared_level: level,
                pooled,
                present,
            },
        );
    }
    if !types.is_empty() && !any_reference {
        findings.push(Finding::new(
            Severity::Error,
            "missing_reference",
            "missing reference condition: no declared reference level occurs in the data".into(),
        ));
    }

    ValidationReport {
        n_trials: table.len(),
        conditions,
        reference_coverage,
        findings,
    }
}

//! Trial data model, response-file parsing and per-condition grouping.
//!
//! A [`TrialTable`] holds every classification response in a dataset
//! together with the closed category set the responses are drawn from.
//! Analyses never operate on raw rows; they operate on [`ResponseSet`]s,
//! which collect all trials of one system under one condition.

mod parse;
mod validate;

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use serde::{Deserialize, Serialize};

pub use parse::{
    parse_trials, parse_trials_reader, write_canonical, InputFormat, CANONICAL_COLUMNS,
    RAW_COLUMNS,
};
pub use validate::{validate, Finding, Severity, ValidationReport};

/// The sixteen entry-level categories of the public benchmark.
pub const DEFAULT_CATEGORIES: [&str; 16] = [
    "airplane", "bear", "bicycle", "bird", "boat", "bottle", "car", "cat", "chair", "clock",
    "dog", "elephant", "keyboard", "knife", "oven", "truck",
];

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
    #[error("missing column `{0}`")]
    MissingColumn(String),
    #[error("unknown category `{label}` on line {line}")]
    UnknownCategory { label: String, line: u64 },
    #[error("duplicate trial on line {line}: {key}")]
    DuplicateTrial { key: String, line: u64 },
    #[error("file contains no trial rows")]
    EmptyFile,
    #[error("invalid value `{value}` for `{column}` on line {line}")]
    InvalidValue {
        column: String,
        value: String,
        line: u64,
    },
    #[error("category set must be non-empty and free of duplicates")]
    InvalidCategorySet,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SystemKind {
    Human,
    Model,
}

impl SystemKind {
    pub fn as_str(self) -> &'static str {
        match self {
            SystemKind::Human => "human",
            SystemKind::Model => "model",
        }
    }
}

impl std::str::FromStr for SystemKind {
    type Err = ();

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s.trim().to_ascii_lowercase().as_str() {
            "human" => Ok(SystemKind::Human),
            "model" => Ok(SystemKind::Model),
            _ => Err(()),
        }
    }
}

/// Closed, ordered set of category labels. Categories are referred to by
/// their index in this set everywhere downstream.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CategorySet {
    labels: Vec<String>,
    index: HashMap<String, usize>,
}

impl CategorySet {
    pub fn new<I, S>(labels: I) -> Result<Self, IngestError>
    where
        I: IntoIterator<Item = S>,
        S: Into<String>,
    {
        let labels: Vec<String> = labels.into_iter().map(Into::into).collect();
        let mut index = HashMap::with_capacity(labels.len());
        for (i, l) in labels.iter().enumerate() {
            if l.is_empty() || index.insert(l.clone(), i).is_some() {
                return Err(IngestError::InvalidCategorySet);
            }
        }
        if labels.is_empty() {
            return Err(IngestError::InvalidCategorySet);
        }
        Ok(Self { labels, index })
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    pub fn index_of(&self, label: &str) -> Option<usize> {
        self.index.get(label).copied()
    }

    pub fn label(&self, idx: usize) -> &str {
        &self.labels[idx]
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    /// Probability of a correct guess under uniform random responding.
    pub fn chance(&self) -> f64 {
        1.0 / self.labels.len() as f64
    }
}

impl Default for CategorySet {
    fn default() -> Self {
        Self::new(DEFAULT_CATEGORIES).expect("default categories are valid")
    }
}

/// One level of one distortion type.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct Condition {
    pub distortion_type: String,
    pub distortion_level: String,
}

impl Condition {
    pub fn new(distortion_type: impl Into<String>, distortion_level: impl Into<String>) -> Self {
        Self {
            distortion_type: distortion_type.into(),
            distortion_level: distortion_level.into(),
        }
    }

    pub fn id(&self) -> String {
        format!("{}_{}", self.distortion_type, self.distortion_level)
    }
}

impl fmt::Display for Condition {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}_{}", self.distortion_type, self.distortion_level)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct TrialRecord {
    pub system_id: String,
    pub system_kind: SystemKind,
    pub family: Option<String>,
    pub subfamily: Option<String>,
    pub distortion_type: String,
    pub distortion_level: String,
    pub image_id: String,
    pub true_category: usize,
    pub response_category: usize,
    pub session_id: Option<String>,
    pub trial_index: Option<u64>,
}

impl TrialRecord {
    pub fn condition(&self) -> Condition {
        Condition::new(&self.distortion_type, &self.distortion_level)
    }

    pub fn is_correct(&self) -> bool {
        self.true_category == self.response_category
    }

    fn unique_key(&self) -> (&str, &str, &str, &str, Option<&str>, Option<u64>) {
        (
            &self.system_id,
            &self.distortion_type,
            &self.distortion_level,
            &self.image_id,
            self.session_id.as_deref(),
            self.trial_index,
        )
    }
}

/// All trials of a dataset plus the category set they were validated against.
#[derive(Debug, Clone, PartialEq)]
pub struct TrialTable {
    categories: CategorySet,
    records: Vec<TrialRecord>,
}

impl TrialTable {
    /// Builds a table, enforcing category bounds and trial-key uniqueness.
    pub fn new(categories: CategorySet, records: Vec<TrialRecord>) -> Result<Self, IngestError> {
        let c = categories.len();
        let mut seen = BTreeSet::new();
        for (i, r) in records.iter().enumerate() {
            let line = i as u64 + 2;
            for cat in [r.true_category, r.response_category] {
                if cat >= c {
                    return Err(IngestError::UnknownCategory {
                        label: cat.to_string(),
                        line,
                    });
                }
            }
            if !seen.insert(r.unique_key()) {
                return Err(IngestError::DuplicateTrial {
                    key: format!("{:?}", r.unique_key()),
                    line,
                });
            }
        }
        Ok(Self {
            categories,
            records,
        })
    }

    pub fn empty(categories: CategorySet) -> Self {
        Self {
            categories,
            records: Vec::new(),
        }
    }

    pub fn categories(&self) -> &CategorySet {
        &self.categories
    }

    pub fn records(&self) -> &[TrialRecord] {
        &self.records
    }

    pub fn len(&self) -> usize {
        self.records.len()
    }

    pub fn is_empty(&self) -> bool {
        self.records.is_empty()
    }

    /// Concatenates two tables over the same category set.
    pub fn merge(self, other: TrialTable) -> Result<Self, IngestError> {
        if self.categories != other.categories {
            return Err(IngestError::InvalidCategorySet);
        }
        let mut records = self.records;
        records.extend(other.records);
        Self::new(self.categories, records)
    }

    /// Fills missing family/subfamily fields from a taxonomy keyed by system id.
    pub fn apply_taxonomy(&mut self, taxonomy: &BTreeMap<String, crate::config::FamilyEntry>) {
        for r in &mut self.records {
            if let Some(entry) = taxonomy.get(&r.system_id) {
                if r.family.is_none() {
                    r.family = entry.family.clone();
                }
                if r.subfamily.is_none() {
                    r.subfamily = entry.subfamily.clone();
                }
                if let Some(kind) = entry.kind {
                    r.system_kind = kind;
                }
            }
        }
    }

    /// Distinct conditions in first-seen-independent (sorted) order.
    pub fn conditions(&self) -> Vec<Condition> {
        let set: BTreeSet<Condition> = self.records.iter().map(|r| r.condition()).collect();
        set.into_iter().collect()
    }
}

/// A single stimulus presentation inside a response set.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Trial {
    pub image_id: String,
    pub truth: usize,
    pub response: usize,
}

impl Trial {
    pub fn is_correct(&self) -> bool {
        self.truth == self.response
    }
}

/// All trials of one system under one condition.
#[derive(Debug, Clone, PartialEq)]
pub struct ResponseSet {
    pub system_id: String,
    pub system_kind: SystemKind,
    pub family: Option<String>,
    pub subfamily: Option<String>,
    pub condition: Condition,
    pub n_categories: usize,
    pub trials: Vec<Trial>,
}

impl ResponseSet {
    pub fn n(&self) -> usize {
        self.trials.len()
    }

    pub fn n_correct(&self) -> usize {
        self.trials.iter().filter(|t| t.is_correct()).count()
    }

    pub fn accuracy(&self) -> f64 {
        self.n_correct() as f64 / self.n() as f64
    }

    /// True iff both sets cover the identical multiset of (image, truth).
    pub fn is_comparable(&self, other: &ResponseSet) -> bool {
        self.n_categories == other.n_categories
            && self.trials.len() == other.trials.len()
            && self
                .trials
                .iter()
                .zip(&other.trials)
                .all(|(a, b)| a.image_id == b.image_id && a.truth == b.truth)
    }
}

/// Key of a response set: (system id, condition id).
pub type ResponseKey = (String, String);

/// Groups a table into per-(system, condition) response sets.
///
/// Trials inside each set are ordered by (image, truth, session, trial index,
/// response) so that two comparable sets line up trial-by-trial regardless
/// of input row order.
pub fn build_response_sets(table: &TrialTable) -> BTreeMap<ResponseKey, ResponseSet> {
    type SortKey<'a> = (&'a str, usize, Option<&'a str>, Option<u64>, usize);
    let mut groups: BTreeMap<ResponseKey, Vec<&TrialRecord>> = BTreeMap::new();
    for r in table.records() {
        groups
            .entry((r.system_id.clone(), r.condition().id()))
            .or_default()
            .push(r);
    }
    let n_categories = table.categories().len();
    groups
        .into_iter()
        .map(|(key, mut rows)| {
            rows.sort_by(|a, b| {
                let ka: SortKey = (
                    &a.image_id,
                    a.true_category,
                    a.session_id.as_deref(),
                    a.trial_index,
                    a.response_category,
                );
                let kb: SortKey = (
                    &b.image_id,
                    b.true_category,
                    b.session_id.as_deref(),
                    b.trial_index,
                    b.response_category,
                );
                ka.cmp(&kb)
            });
            let first = rows[0];
            // Metadata may be sparse; take the first non-empty value.
            let family = rows.iter().find_map(|r| r.family.clone());
            let subfamily = rows.iter().find_map(|r| r.subfamily.clone());
            let set = ResponseSet {
                system_id: first.system_id.clone(),
                system_kind: first.system_kind,
                family,
                subfamily,
                condition: first.condition(),
                n_categories,
                trials: rows
                    .iter()
                    .map(|r| Trial {
                        image_id: r.image_id.clone(),
                        truth: r.true_category,
                        response: r.response_category,
                    })
                    .collect(),
            };
            (key, set)
        })
        .collect()
}

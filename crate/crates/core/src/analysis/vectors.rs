use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{AlignmentRecord, AnalysisError, DistanceMatrix};
use crate::stats::mean;

/// Per-model concatenation of mean EC and MA with human partners over a
/// fixed condition roster.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentVectors {
    pub models: Vec<String>,
    /// `"{condition_id}:ec"` / `"{condition_id}:ma"`, in roster order.
    pub columns: Vec<String>,
    pub values: Vec<Vec<f64>>,
    /// Entries filled with the column mean over models, per model.
    pub imputed: BTreeMap<String, usize>,
    /// Columns dropped because no model had a defined value.
    pub dropped_columns: Vec<String>,
}

impl AlignmentVectors {
    pub fn vector(&self, model: &str) -> Option<&[f64]> {
        self.models
            .iter()
            .position(|m| m == model)
            .map(|i| self.values[i].as_slice())
    }

    /// Pairwise Euclidean distances between the models' vectors.
    pub fn distances(&self) -> Result<DistanceMatrix, AnalysisError> {
        DistanceMatrix::from_fn(self.models.clone(), |i, j| {
            self.values[i]
                .iter()
                .zip(&self.values[j])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
    }
}

/// Builds alignment vectors for `models` over `roster` (condition ids).
///
/// Each entry is the mean over the model's human partners of the defined EC
/// (or MA) values in that condition. Missing entries are imputed with the
/// mean of the other models' values in that column and counted.
pub fn alignment_vectors(
    models: &[String],
    records: &[AlignmentRecord],
    roster: &[String],
) -> Result<AlignmentVectors, AnalysisError> {
    if roster.is_empty() || models.is_empty() {
        return Err(AnalysisError::EmptyRoster);
    }
    // (model, condition) -> (ec values, ma values)
    let mut cells: BTreeMap<(&str, String), (Vec<f64>, Vec<f64>)> = BTreeMap::new();
    for r in records {
        if let Some(model) = r.model_side() {
            let e = cells.entry((model, r.condition.id())).or_default();
            if let Some(v) = r.ec.value() {
                e.0.push(v);
            }
            if let Some(v) = r.ma.value() {
                e.1.push(v);
            }
        }
    }
    let mut columns = Vec::new();
    let mut raw: Vec<Vec<Option<f64>>> = vec![Vec::new(); models.len()];
    for cid in roster {
        for (metric, pick) in [("ec", 0), ("ma", 1)] {
            columns.push(format!("{cid}:{metric}"));
            for (i, m) in models.iter().enumerate() {
                let v = cells.get(&(m.as_str(), cid.clone())).and_then(|(ec, ma)| {
                    let vals = if pick == 0 { ec } else { ma };
                    (!vals.is_empty()).then(|| mean(vals))
                });
                raw[i].push(v);
            }
        }
    }
    let mut keep = Vec::new();
    let mut dropped_columns = Vec::new();
    let mut column_means = Vec::new();
    for (c, name) in columns.iter().enumerate() {
        let defined: Vec<f64> = raw.iter().filter_map(|row| row[c]).collect();
        if defined.is_empty() {
            dropped_columns.push(name.clone());
        } else {
            keep.push(c);
            column_means.push(mean(&defined));
        }
    }
    if keep.is_empty() {
        return Err(AnalysisError::EmptyRoster);
    }
    let mut imputed = BTreeMap::new();
    let values = raw
        .iter()
        .zip(models)
        .map(|(row, m)| {
            let mut count = 0;
            let v = keep
                .iter()
                .zip(&column_means)
                .map(|(&c, &fill)| {
                    row[c].unwrap_or_else(|| {
                        count += 1;
                        fill
                    })
                })
                .collect();
            imputed.insert(m.clone(), count);
            v
        })
        .collect();
    Ok(AlignmentVectors {
        models: models.to_vec(),
        columns: keep.iter().map(|&c| columns[c].clone()).collect(),
        values,
        imputed,
        dropped_columns,
    })
}

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{CategorySet, IngestError, SystemKind, TrialRecord, TrialTable};

pub const CANONICAL_COLUMNS: [&str; 11] = [
    "system_id",
    "system_kind",
    "family",
    "subfamily",
    "distortion_type",
    "distortion_level",
    "image_id",
    "true_category",
    "response_category",
    "session_id",
    "trial_index",
];

/// Columns required from the benchmark's raw-trial files. `rt` is ignored.
pub const RAW_COLUMNS: [&str; 7] = [
    "subj",
    "session",
    "trial",
    "object_response",
    "category",
    "condition",
    "imagename",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "snake_case")]
pub enum InputFormat {
    #[default]
    Canonical,
    #[serde(alias = "modelvshuman")]
    ModelvshumanRaw,
}

impl std::str::FromStr for InputFormat {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "canonical" => Ok(InputFormat::Canonical),
            "modelvshuman" | "modelvshuman_raw" => Ok(InputFormat::ModelvshumanRaw),
            other => Err(format!("unknown format `{other}`")),
        }
    }
}

/// Parses a trial file. For raw benchmark files whose condition column holds
/// only the level token, the distortion type is taken from the file stem
/// (the part before `_subject-`, or before the first `_`).
pub fn parse_trials(
    path: &Path,
    format: InputFormat,
    categories: &CategorySet,
) -> Result<TrialTable, IngestError> {
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let experiment = path
        .file_stem()
        .and_then(|s| s.to_str())
        .map(experiment_from_stem);
    parse_trials_reader(file, format, categories, experiment.as_deref())
}

fn experiment_from_stem(stem: &str) -> String {
    if let Some(pos) = stem.find("_subject-") {
        return stem[..pos].to_string();
    }
    stem.split('_').next().unwrap_or(stem).to_string()
}

pub fn parse_trials_reader<R: Read>(
    reader: R,
    format: InputFormat,
    categories: &CategorySet,
    experiment: Option<&str>,
) -> Result<TrialTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .flexible(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let headers = match rdr.headers() {
        Ok(h) => h.clone(),
        Err(e) if matches!(e.kind(), csv::ErrorKind::UnequalLengths { .. }) => return Err(e.into()),
        Err(_) => return Err(IngestError::EmptyFile),
    };
    if headers.is_empty() || (headers.len() == 1 && headers[0].is_empty()) {
        return Err(IngestError::EmptyFile);
    }
    let required: &[&str] = match format {
        InputFormat::Canonical => &CANONICAL_COLUMNS,
        InputFormat::ModelvshumanRaw => &RAW_COLUMNS,
    };
    let mut cols = Vec::with_capacity(required.len());
    for name in required {
        let idx = headers
            .iter()
            .position(|h| h == *name)
            .ok_or_else(|| IngestError::MissingColumn(name.to_string()))?;
        cols.push(idx);
    }

    let mut records = Vec::new();
    for (row, result) in rdr.records().enumerate() {
        let rec = result?;
        let line = row as u64 + 2;
        let get = |i: usize| rec.get(cols[i]).unwrap_or("");
        let category = |label: &str| {
            categories
                .index_of(label)
                .ok_or_else(|| IngestError::UnknownCategory {
                    label: label.to_string(),
                    line,
                })
        };
        let opt = |s: &str| (!s.is_empty()).then(|| s.to_string());
        let record = match format {
            InputFormat::Canonical => {
                let kind = get(1).parse::<SystemKind>().map_err(|_| IngestError::InvalidValue {
                    column: "system_kind".into(),
                    value: get(1).into(),
                    line,
                })?;
                let trial_index = parse_index(get(10), "trial_index", line)?;
                TrialRecord {
                    system_id: get(0).to_string(),
                    system_kind: kind,
                    family: opt(get(2)),
                    subfamily: opt(get(3)),
                    distortion_type: get(4).to_string(),
                    distortion_level: get(5).to_string(),
                    image_id: get(6).to_string(),
                    true_category: category(get(7))?,
                    response_category: category(get(8))?,
                    session_id: opt(get(9)),
                    trial_index,
                }
            }
            InputFormat::ModelvshumanRaw => {
                let subj = get(0);
                let (dtype, level) = split_condition(get(5), experiment);
                let kind = if subj.starts_with("subject-") {
                    SystemKind::Human
                } else {
                    SystemKind::Model
                };
                TrialRecord {
                    system_id: subj.to_string(),
                    system_kind: kind,
                    family: None,
                    subfamily: None,
                    distortion_type: dtype,
                    distortion_level: level,
                    image_id: get(6).to_string(),
                    true_category: category(get(4))?,
                    response_category: category(get(3))?,
                    session_id: opt(get(1)),
                    trial_index: parse_index(get(2), "trial", line)?,
                }
            }
        };
        for (name, v) in [
            ("system_id", &record.system_id),
            ("distortion_type", &record.distortion_type),
            ("image_id", &record.image_id),
        ] {
            if v.is_empty() {
                return Err(IngestError::InvalidValue {
                    column: name.into(),
                    value: String::new(),
                    line,
                });
            }
        }
        records.push(record);
    }
    if records.is_empty() {
        return Err(IngestError::EmptyFile);
    }
    TrialTable::new(categories.clone(), records)
}

fn parse_index(s: &str, column: &str, line: u64) -> Result<Option<u64>, IngestError> {
    if s.is_empty() {
        return Ok(None);
    }
    s.parse::<u64>()
        .map(Some)
        .map_err(|_| IngestError::InvalidValue {
            column: column.into(),
            value: s.into(),
            line,
        })
}

/// Splits `type_level` tokens; bare level tokens take the experiment name.
fn split_condition(token: &str, experiment: Option<&str>) -> (String, String) {
    if let Some((t, l)) = token.split_once('_') {
        return (t.to_string(), l.to_string());
    }
    match experiment {
        Some(e) => (e.to_string(), token.to_string()),
        None => (token.to_string(), String::new()),
    }
}

/// Writes a table in the canonical CSV layout.
pub fn write_canonical<W: Write>(table: &TrialTable, writer: W) -> Result<(), IngestError> {
    let mut w = csv::Writer::from_writer(writer);
    w.write_record(CANONICAL_COLUMNS)?;
    let cats = table.categories();
    for r in table.records() {
        let trial = r.trial_index.map(|t| t.to_string()).unwrap_or_default();
        w.write_record([
            r.system_id.as_str(),
            r.system_kind.as_str(),
            r.family.as_deref().unwrap_or(""),
            r.subfamily.as_deref().unwrap_or(""),
            &r.distortion_type,
            &r.distortion_level,
            &r.image_id,
            cats.label(r.true_category),
            cats.label(r.response_category),
            r.session_id.as_deref().unwrap_or(""),
            &trial,
        ])?;
    }
    w.flush().map_err(|source| IngestError::Io {
        path: "<writer>".into(),
        source,
    })?;
    Ok(())
}

//! End-to-end report builders: load trials, then derive the spectrum,
//! alignment, ranking, permutation and screening reports that the CLI writes.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::analysis::{
    alignment_vectors, all_ratios, cled_group_separability, family_permutation_test, metric_cells,
    pairwise_alignment, rank_models, select_representatives, superfamily_rank_test, AlignmentRecord,
    AlignmentVectors, AnalysisError, DistanceMatrix, MetricCell, PairKind, PermutationResult, RankTestTable,
    RatioMetric, RatioTable, RegimeRanking, Representatives, Separability,
};
use crate::config::{AnalysisConfig, ConfigError};
use crate::ingest::{
    build_response_sets, parse_trials, validate, IngestError, InputFormat, ResponseKey, ResponseSet, SystemKind,
    TrialTable, ValidationReport,
};
use crate::metrics::{cled, error_confusion, ErrorConfusion, MetricError};
use crate::spectrum::{build_spectrum, human_counts, reference_sample, Spectrum, SpectrumError, SpectrumParams};
use crate::stats::{
    binomial_above_chance, bh_adjust, mann_whitney_u, mean, normality_tests, Alternative, StatsError, TestResult,
};

/// Significance level of the screening tables.
pub const SCREEN_ALPHA: f64 = 0.01;

#[derive(Debug, thiserror::Error)]
pub enum PipelineError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Ingest(#[from] IngestError),
    #[error(transparent)]
    Spectrum(#[from] SpectrumError),
    #[error(transparent)]
    Analysis(#[from] AnalysisError),
    #[error(transparent)]
    Stats(#[from] StatsError),
    #[error(transparent)]
    Metric(#[from] MetricError),
    #[error("{0}")]
    Invalid(String),
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SystemInfo {
    pub kind: SystemKind,
    pub family: Option<String>,
    pub subfamily: Option<String>,
}

/// Trials plus the configuration they are analysed under.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub config: AnalysisConfig,
    pub table: TrialTable,
    pub sets: BTreeMap<ResponseKey, ResponseSet>,
}

impl Dataset {
    pub fn new(config: AnalysisConfig, mut table: TrialTable) -> Self {
        table.apply_taxonomy(&config.taxonomy);
        let sets = build_response_sets(&table);
        Self { config, table, sets }
    }

    /// Parses and merges every path, in the given order.
    pub fn load<P: AsRef<Path>>(config: AnalysisConfig, paths: &[P], format: InputFormat) -> Result<Self, PipelineError> {
        if paths.is_empty() {
            return Err(PipelineError::Invalid("no input paths given".into()));
        }
        let categories = config.category_set()?;
        let mut table = TrialTable::empty(categories.clone());
        for p in paths {
            table = table.merge(parse_trials(p.as_ref(), format, &categories)?)?;
        }
        Ok(Self::new(config, table))
    }

    pub fn validate(&self) -> ValidationReport {
        validate(&self.table, &self.config.references)
    }

    pub fn systems(&self) -> BTreeMap<String, SystemInfo> {
        self.sets
            .values()
            .map(|s| {
                (
                    s.system_id.clone(),
                    SystemInfo {
                        kind: s.system_kind,
                        family: s.family.clone(),
                        subfamily: s.subfamily.clone(),
                    },
                )
            })
            .collect()
    }

    fn by_condition(&self) -> BTreeMap<String, Vec<&ResponseSet>> {
        let mut out: BTreeMap<String, Vec<&ResponseSet>> = BTreeMap::new();
        for ((_, cid), s) in &self.sets {
            out.entry(cid.clone()).or_default().push(s);
        }
        out
    }

    /// Fails with the first error-level validation finding, if any.
    pub fn require_valid(&self) -> Result<ValidationReport, PipelineError> {
        let report = self.validate();
        if let Some(f) = report.errors().next() {
            return Err(PipelineError::Invalid(f.message.clone()));
        }
        Ok(report)
    }

    pub fn spectrum_params(&self) -> SpectrumParams {
        let a = &self.config.analysis;
        SpectrumParams {
            k_min: a.k_min,
            k_max: a.k_max,
            seed: a.seed,
            restarts: a.restarts,
        }
    }
}

pub fn run_spectrum(ds: &Dataset) -> Result<Spectrum, PipelineError> {
    ds.require_valid()?;
    Ok(build_spectrum(&ds.sets, &ds.config.references, &ds.spectrum_params())?)
}

/// Mean human–human alignment in one condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HumanBaseline {
    pub condition_id: String,
    pub n_pairs: usize,
    pub ec: Option<f64>,
    pub ma: Option<f64>,
    pub combined: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignReport {
    pub alpha: f64,
    pub systems: BTreeMap<String, SystemInfo>,
    pub records: Vec<AlignmentRecord>,
    pub human_baselines: Vec<HumanBaseline>,
    /// Pairs skipped for differing stimulus sets, per condition.
    pub skipped_non_comparable: BTreeMap<String, Vec<(String, String)>>,
    /// Pairs with both EC and MA undefined, per condition.
    pub fully_undefined: BTreeMap<String, usize>,
}

/// Alignment records plus the flat metric cell dump.
pub fn run_align(ds: &Dataset) -> Result<(AlignReport, Vec<MetricCell>), PipelineError> {
    let alpha = ds.config.analysis.alpha;
    let mut report = AlignReport {
        alpha,
        systems: ds.systems(),
        records: Vec::new(),
        human_baselines: Vec::new(),
        skipped_non_comparable: BTreeMap::new(),
        fully_undefined: BTreeMap::new(),
    };
    let mut cells = Vec::new();
    for (cid, sets) in ds.by_condition() {
        let table = pairwise_alignment(&sets)?;
        cells.extend(metric_cells(&sets, alpha)?);
        let hh: Vec<&AlignmentRecord> = table.records.iter().filter(|r| r.kind == PairKind::HumanHuman).collect();
        if !hh.is_empty() {
            let avg = |m: RatioMetric| {
                let v: Vec<f64> = hh.iter().filter_map(|r| m.cell(r)).collect();
                (!v.is_empty()).then(|| mean(&v))
            };
            report.human_baselines.push(HumanBaseline {
                condition_id: cid.clone(),
                n_pairs: hh.len(),
                ec: avg(RatioMetric::Ec),
                ma: avg(RatioMetric::Ma),
                combined: avg(RatioMetric::Combined),
            });
        }
        if !table.skipped_non_comparable.is_empty() {
            report.skipped_non_comparable.insert(cid.clone(), table.skipped_non_comparable);
        }
        if table.fully_undefined > 0 {
            report.fully_undefined.insert(cid.clone(), table.fully_undefined);
        }
        report.records.extend(table.records);
    }
    Ok((report, cells))
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankTestRow {
    pub metric: RatioMetric,
    pub regime: String,
    pub table: Option<RankTestTable>,
    pub note: Option<String>,
}

/// Mean per-partner alignment of one family at one representative condition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RadarRow {
    pub family: String,
    pub distortion_type: String,
    pub regime: String,
    pub condition_id: String,
    pub metric: RatioMetric,
    pub value: f64,
    pub rho: f64,
    pub n_models: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankReport {
    pub ratios: RatioTable,
    pub representatives: Representatives,
    pub rankings: BTreeMap<RatioMetric, Vec<RegimeRanking>>,
    pub rank_tests: Vec<RankTestRow>,
    pub radar: Vec<RadarRow>,
}

fn model_families(align: &AlignReport) -> BTreeMap<String, String> {
    align
        .systems
        .iter()
        .filter(|(_, s)| s.kind == SystemKind::Model)
        .filter_map(|(id, s)| s.family.clone().map(|f| (id.clone(), f)))
        .collect()
}

pub fn run_rank(spectrum: &Spectrum, align: &AlignReport) -> Result<RankReport, PipelineError> {
    let ratios = all_ratios(&align.records);
    let representatives = select_representatives(&spectrum.assignment, &spectrum.scores());
    let families = model_families(align);
    let regimes = &spectrum.assignment.regimes;

    let mut rankings = BTreeMap::new();
    let mut rank_tests = Vec::new();
    for metric in RatioMetric::ALL {
        let rs: Vec<_> = ratios.for_metric(metric).collect();
        let ranked = rank_models(&rs, regimes, &representatives, &families);
        for r in &ranked {
            let mut by_family: BTreeMap<String, Vec<f64>> = BTreeMap::new();
            for e in &r.entries {
                if let Some(f) = &e.family {
                    by_family.entry(f.clone()).or_default().push(e.mean_rho);
                }
            }
            let (table, note) = match superfamily_rank_test(&by_family) {
                Ok(t) => (Some(t), None),
                Err(e) => (None, Some(e.to_string())),
            };
            rank_tests.push(RankTestRow {
                metric,
                regime: r.regime.clone(),
                table,
                note,
            });
        }
        rankings.insert(metric, ranked);
    }

    let mut radar = Vec::new();
    for rep in &representatives.entries {
        for metric in [RatioMetric::Ec, RatioMetric::Ma] {
            let mut per_family: BTreeMap<&str, (Vec<f64>, Vec<f64>)> = BTreeMap::new();
            for r in ratios
                .for_metric(metric)
                .filter(|r| r.condition_id == rep.condition_id)
            {
                if let Some(f) = families.get(&r.model_id) {
                    let e = per_family.entry(f).or_default();
                    e.0.push(r.a_model);
                    e.1.push(r.rho);
                }
            }
            for (family, (values, rhos)) in per_family {
                radar.push(RadarRow {
                    family: family.to_string(),
                    distortion_type: rep.distortion_type.clone(),
                    regime: rep.regime.clone(),
                    condition_id: rep.condition_id.clone(),
                    metric,
                    value: mean(&values),
                    rho: mean(&rhos),
                    n_models: values.len(),
                });
            }
        }
    }
    radar.sort_by(|a, b| {
        (&a.family, &a.distortion_type, &a.regime, a.metric).cmp(&(&b.family, &b.distortion_type, &b.regime, b.metric))
    });

    Ok(RankReport {
        ratios,
        representatives,
        rankings,
        rank_tests,
        radar,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FamilyTestRow {
    pub regime: String,
    /// `superfamily` or `subfamily`.
    pub level: String,
    pub models: Vec<String>,
    pub result: Option<PermutationResult>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegimeVectors {
    pub regime: String,
    pub vectors: AlignmentVectors,
    pub distances: DistanceMatrix,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SeparabilityRow {
    /// `distortion_type` or `ood_regime`.
    pub grouping: String,
    pub result: Option<Separability>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PermtestReport {
    pub n_perm: usize,
    pub seed: u64,
    pub family_tests: Vec<FamilyTestRow>,
    pub vectors: Vec<RegimeVectors>,
    /// CLED between conditions, from errors pooled over all human observers.
    pub human_cled: DistanceMatrix,
    /// Conditions left out because their pooled human errors are empty.
    pub cled_dropped: Vec<String>,
    pub separability: Vec<SeparabilityRow>,
}

fn pooled_human_confusions(ds: &Dataset) -> BTreeMap<String, ErrorConfusion> {
    let c = ds.table.categories().len();
    let mut out: BTreeMap<String, ErrorConfusion> = BTreeMap::new();
    for s in ds.sets.values().filter(|s| s.system_kind == SystemKind::Human) {
        out.entry(s.condition.id())
            .or_insert_with(|| ErrorConfusion::zeros(c))
            .merge(&error_confusion(s));
    }
    out
}

fn note<T, E: ToString>(r: Result<T, E>) -> (Option<T>, Option<String>) {
    match r {
        Ok(v) => (Some(v), None),
        Err(e) => (None, Some(e.to_string())),
    }
}

pub fn run_permtest(ds: &Dataset, spectrum: &Spectrum, align: &AlignReport) -> Result<PermtestReport, PipelineError> {
    let a = &ds.config.analysis;
    let (n_perm, seed) = (a.n_perm, a.seed);
    let representatives = select_representatives(&spectrum.assignment, &spectrum.scores());

    let mut family_tests = Vec::new();
    let mut vectors = Vec::new();
    for regime in &spectrum.assignment.regimes {
        let roster: Vec<String> = representatives.in_regime(regime).map(|r| r.condition_id.clone()).collect();
        if roster.is_empty() {
            continue;
        }
        let in_roster: BTreeSet<&String> = roster.iter().collect();
        let models: Vec<String> = align
            .records
            .iter()
            .filter(|r| in_roster.contains(&r.condition.id()))
            .filter_map(|r| r.model_side().map(String::from))
            .collect::<BTreeSet<_>>()
            .into_iter()
            .collect();
        if models.is_empty() {
            continue;
        }
        let v = alignment_vectors(&models, &align.records, &roster)?;
        let dist = v.distances()?;
        for (level, pick) in [("superfamily", 0), ("subfamily", 1)] {
            let grouping: BTreeMap<String, String> = models
                .iter()
                .filter_map(|m| {
                    let s = align.systems.get(m)?;
                    let label = if pick == 0 { &s.family } else { &s.subfamily };
                    label.clone().map(|l| (m.clone(), l))
                })
                .collect();
            let labelled: Vec<usize> = (0..models.len()).filter(|&i| grouping.contains_key(&models[i])).collect();
            let sub = DistanceMatrix::from_fn(labelled.iter().map(|&i| models[i].clone()).collect(), |i, j| {
                dist.get(labelled[i], labelled[j])
            })?;
            let (result, note) = note(family_permutation_test(&sub, &grouping, n_perm, seed));
            family_tests.push(FamilyTestRow {
                regime: regime.clone(),
                level: level.to_string(),
                models: sub.labels.clone(),
                result,
                note,
            });
        }
        vectors.push(RegimeVectors {
            regime: regime.clone(),
            vectors: v,
            distances: dist,
        });
    }

    let confusions = pooled_human_confusions(ds);
    let (kept, cled_dropped): (Vec<_>, Vec<_>) = confusions.iter().partition(|(_, f)| f.total_errors() > 0);
    let labels: Vec<String> = kept.iter().map(|(id, _)| (*id).clone()).collect();
    let mut values = vec![vec![0.0; labels.len()]; labels.len()];
    for i in 0..labels.len() {
        for j in i + 1..labels.len() {
            let v = cled(kept[i].1, kept[j].1, a.alpha)?
                .cled
                .value()
                .expect("both confusions carry errors");
            values[i][j] = v;
            values[j][i] = v;
        }
    }
    let human_cled = DistanceMatrix::new(labels, values)?;

    let by_type: BTreeMap<String, String> = ds
        .sets
        .values()
        .map(|s| (s.condition.id(), s.condition.distortion_type.clone()))
        .collect();
    let by_regime: BTreeMap<String, String> = spectrum.assignment.assignment.clone();
    let mut separability = Vec::new();
    for (name, grouping) in [("distortion_type", &by_type), ("ood_regime", &by_regime)] {
        let (result, note) = note(cled_group_separability(&human_cled, grouping, n_perm, seed));
        separability.push(SeparabilityRow {
            grouping: name.to_string(),
            result,
            note,
        });
    }

    Ok(PermtestReport {
        n_perm,
        seed,
        family_tests,
        vectors,
        human_cled,
        cled_dropped: cled_dropped.into_iter().map(|(id, _)| id.clone()).collect(),
        separability,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MannWhitneyRow {
    pub condition_id: String,
    pub n: usize,
    pub n_reference: usize,
    pub u: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub significant: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BinomialRow {
    pub condition_id: String,
    pub k: u64,
    pub n: u64,
    pub chance: f64,
    pub p_value: f64,
    pub p_adjusted: f64,
    pub reject: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NormalityRow {
    /// `accuracy` or `logit`.
    pub sample: String,
    pub test: String,
    pub statistic: Option<f64>,
    pub p_value: Option<f64>,
    pub note: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub alpha: f64,
    pub reference_conditions: Vec<String>,
    pub n_reference: usize,
    pub mann_whitney: Vec<MannWhitneyRow>,
    pub n_not_significant: usize,
    pub binomial: Vec<BinomialRow>,
    pub n_above_chance: usize,
    pub normality: Vec<NormalityRow>,
}

/// Screening tables: per-condition rank-sum tests against the pooled
/// reference, binomial tests against chance, and normality of the reference.
pub fn run_stats(ds: &Dataset) -> Result<StatsReport, PipelineError> {
    ds.require_valid()?;
    let counts = human_counts(&ds.sets);
    let refs = &ds.config.references;
    let (reference_conditions, reference) = reference_sample(&counts, refs)?;
    let tested: Vec<_> = counts.iter().filter(|(c, _)| !refs.is_reference(c)).collect();

    let mut mw = Vec::with_capacity(tested.len());
    let mut bin = Vec::with_capacity(tested.len());
    let chance = ds.table.categories().chance();
    for (c, v) in &tested {
        let acc: Vec<f64> = v.iter().map(|&(k, n)| k as f64 / n as f64).collect();
        mw.push((c.id(), v.len(), mann_whitney_u(&acc, &reference.values, Alternative::TwoSided)?));
        let k: u64 = v.iter().map(|x| x.0 as u64).sum();
        let n: u64 = v.iter().map(|x| x.1 as u64).sum();
        bin.push((c.id(), k, n, binomial_above_chance(k, n, chance)?));
    }
    let mw_adj = bh_adjust(&mw.iter().map(|r| r.2.p_value).collect::<Vec<_>>())?;
    let bin_adj = bh_adjust(&bin.iter().map(|r| r.3.p_value).collect::<Vec<_>>())?;

    let mann_whitney: Vec<MannWhitneyRow> = mw
        .into_iter()
        .zip(mw_adj)
        .map(|((condition_id, n, t), p_adjusted)| MannWhitneyRow {
            condition_id,
            n,
            n_reference: reference.len(),
            u: t.statistic,
            p_value: t.p_value,
            p_adjusted,
            significant: p_adjusted < SCREEN_ALPHA,
        })
        .collect();
    let binomial: Vec<BinomialRow> = bin
        .into_iter()
        .zip(bin_adj)
        .map(|((condition_id, k, n, t), p_adjusted)| BinomialRow {
            condition_id,
            k,
            n,
            chance,
            p_value: t.p_value,
            p_adjusted,
            reject: p_adjusted < SCREEN_ALPHA,
        })
        .collect();

    let a = &ds.config.analysis;
    let mut normality = Vec::new();
    for (name, sample) in [("accuracy", &reference.values), ("logit", &reference.logits)] {
        match normality_tests(sample, a.lilliefors_replicates, a.seed) {
            Ok(tests) => normality.extend(tests.into_iter().map(|t: TestResult| NormalityRow {
                sample: name.to_string(),
                test: t.method,
                statistic: Some(t.statistic),
                p_value: Some(t.p_value),
                note: None,
            })),
            Err(e) => normality.push(NormalityRow {
                sample: name.to_string(),
                test: "all".into(),
                statistic: None,
                p_value: None,
                note: Some(e.to_string()),
            }),
        }
    }

    Ok(StatsReport {
        alpha: SCREEN_ALPHA,
        n_reference: reference.len(),
        reference_conditions,
        n_not_significant: mann_whitney.iter().filter(|r| !r.significant).count(),
        n_above_chance: binomial.iter().filter(|r| r.reject).count(),
        mann_whitney,
        binomial,
        normality,
    })
}

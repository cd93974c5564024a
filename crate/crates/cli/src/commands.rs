use std::fs;
use std::path::{Path, PathBuf};

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use oodspec::analysis::{MetricCell, RatioMetric};
use oodspec::config::AnalysisConfig;
use oodspec::ingest::write_canonical;
use oodspec::pipeline::{
    run_align, run_permtest, run_rank, run_spectrum, run_stats, AlignReport, Dataset, HumanBaseline, PipelineError,
    RadarRow,
};
use oodspec::spectrum::Spectrum;
use oodspec::synth::{simulate_observers, ScenarioSpec};

use crate::output::{sha256_file, sha256_hex, FileHash, Manifest, OutputDir};
use crate::{svg, CliError, Common};

pub const METRIC_CELL_COLUMNS: [&str; 7] = ["condition_id", "system_a", "system_b", "metric", "value", "defined", "n_basis"];

impl From<PipelineError> for CliError {
    fn from(e: PipelineError) -> Self {
        CliError::input(e.to_string())
    }
}

/// Resolved inputs of one invocation.
struct Run {
    config: AnalysisConfig,
    config_path: Option<PathBuf>,
    config_sha256: Option<String>,
    inputs: Vec<PathBuf>,
    out: PathBuf,
}

fn base_dir(path: &Option<PathBuf>) -> PathBuf {
    path.as_ref()
        .and_then(|p| p.parent())
        .map(Path::to_path_buf)
        .unwrap_or_default()
}

fn read_text(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::input(format!("cannot read {}: {e}", path.display())))
}

fn resolve(c: &Common) -> Result<Run, CliError> {
    let (mut config, config_sha256) = match &c.config {
        Some(p) => {
            let text = read_text(p)?;
            let cfg = AnalysisConfig::from_toml(&text).map_err(|e| CliError::input(e.to_string()))?;
            (cfg, Some(sha256_hex(text.as_bytes())))
        }
        None => (AnalysisConfig::default(), None),
    };
    let base = base_dir(&c.config);
    if let Some(s) = c.seed {
        config.analysis.seed = s;
    }
    if let Some(n) = c.n_perm {
        config.analysis.n_perm = n;
    }
    if let Some((a, b)) = c.k_range {
        config.analysis.k_min = a;
        config.analysis.k_max = b;
    }
    if let Some(f) = c.format {
        config.input.format = f;
    }
    config.check().map_err(|e| CliError::input(e.to_string()))?;

    let inputs: Vec<PathBuf> = if c.inputs.is_empty() {
        config.input.paths.iter().map(|p| base.join(p)).collect()
    } else {
        c.inputs.clone()
    };
    for p in &inputs {
        if !p.exists() {
            return Err(CliError::input(format!("input file not found: {}", p.display())));
        }
    }
    let out = match (&c.out, &config.output) {
        (Some(o), _) => o.clone(),
        (None, Some(o)) => base.join(o),
        (None, None) => PathBuf::from("out"),
    };
    Ok(Run {
        config,
        config_path: c.config.clone(),
        config_sha256,
        inputs,
        out,
    })
}

impl Run {
    fn dataset(&self) -> Result<Dataset, CliError> {
        Ok(Dataset::load(self.config.clone(), &self.inputs, self.config.input.format)?)
    }

    fn manifest(&self, command: &str, n_perm: Option<usize>) -> Result<Manifest, CliError> {
        let inputs = self
            .inputs
            .iter()
            .map(|p| {
                Ok(FileHash {
                    path: p.display().to_string(),
                    sha256: sha256_file(p)?,
                })
            })
            .collect::<Result<_, CliError>>()?;
        Ok(Manifest {
            tool: "oodspec".into(),
            version: env!("CARGO_PKG_VERSION").into(),
            command: command.into(),
            seed: self.config.analysis.seed,
            n_perm,
            config_path: self.config_path.as_ref().map(|p| p.display().to_string()),
            config_sha256: self.config_sha256.clone(),
            inputs,
            outputs: Vec::new(),
            created_unix: 0,
        })
    }

    /// Reads a report written by an earlier command into this output directory.
    fn prerequisite<T: DeserializeOwned>(&self, name: &str, producer: &str) -> Result<T, CliError> {
        let path = self.out.join(name);
        let text = fs::read_to_string(&path).map_err(|_| {
            CliError::input(format!(
                "missing prerequisite {}: run `oodspec {producer}` with the same --out first",
                path.display()
            ))
        })?;
        serde_json::from_str(&text).map_err(|e| CliError::input(format!("{} is not a valid {producer} report: {e}", path.display())))
    }
}

pub fn validate(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let ds = run.dataset()?;
    let report = ds.validate();
    let mut out = OutputDir::create(&run.out)?;
    out.json("validation.json", &report)?;
    out.finish(run.manifest("validate", None)?)?;
    let first_error = report.errors().next().map(|f| f.message.clone());
    match first_error {
        Some(m) => Err(CliError::input(m)),
        None => Ok(()),
    }
}

pub fn simulate(c: &Common) -> Result<(), CliError> {
    let path = c
        .config
        .as_ref()
        .ok_or_else(|| CliError::input("simulate needs --config <scenario.toml>"))?;
    let text = read_text(path)?;
    let spec = ScenarioSpec::from_toml(&text).map_err(|e| CliError::input(e.to_string()))?;
    let seed = c.seed.unwrap_or(spec.seed);
    let table = simulate_observers(&spec, seed).map_err(|e| CliError::input(e.to_string()))?;
    let mut bytes = Vec::new();
    write_canonical(&table, &mut bytes).map_err(|e| CliError::internal(e.to_string()))?;

    let out_dir = c.out.clone().unwrap_or_else(|| PathBuf::from("out"));
    let mut out = OutputDir::create(&out_dir)?;
    out.raw("trials.csv", &bytes)?;
    let categories = table.categories().clone();
    let back = oodspec::ingest::parse_trials(&out.path("trials.csv"), Default::default(), &categories)
        .map_err(|e| CliError::internal(format!("trials.csv failed schema check: {e}")))?;
    if back.len() != table.len() {
        return Err(CliError::internal("trials.csv row count mismatch"));
    }
    out.finish(Manifest {
        tool: "oodspec".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: "simulate".into(),
        seed,
        n_perm: None,
        config_path: Some(path.display().to_string()),
        config_sha256: Some(sha256_hex(text.as_bytes())),
        inputs: Vec::new(),
        outputs: Vec::new(),
        created_unix: 0,
    })
}

#[derive(Debug, Serialize, Deserialize)]
struct CriterionRow {
    k: usize,
    n_params: usize,
    log_likelihood: f64,
    bic: f64,
    aicc: f64,
    selected: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct ConditionRow {
    condition_id: String,
    distortion_type: String,
    distortion_level: String,
    delta: f64,
    mean_accuracy: f64,
    n_participants: usize,
    is_reference: bool,
    regime: String,
    posterior: f64,
}

pub fn spectrum(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let ds = run.dataset()?;
    let s = run_spectrum(&ds)?;
    let mut out = OutputDir::create(&run.out)?;
    out.json("spectrum.json", &s)?;
    let criteria: Vec<CriterionRow> = s
        .selection
        .candidates
        .iter()
        .map(|c| CriterionRow {
            k: c.k,
            n_params: c.n_params,
            log_likelihood: c.fit.log_likelihood,
            bic: c.bic,
            aicc: c.aicc,
            selected: c.k == s.selection.selected_k,
        })
        .collect();
    out.csv(
        "spectrum_criteria.csv",
        &["k", "n_params", "log_likelihood", "bic", "aicc", "selected"],
        &criteria,
    )?;
    let rows: Vec<ConditionRow> = s
        .conditions
        .iter()
        .map(|c| ConditionRow {
            condition_id: c.condition_id.clone(),
            distortion_type: c.score.condition.distortion_type.clone(),
            distortion_level: c.score.condition.distortion_level.clone(),
            delta: c.score.delta,
            mean_accuracy: c.mean_accuracy,
            n_participants: c.n_participants,
            is_reference: c.is_reference,
            posterior: s
                .assignment
                .regime_index(&c.regime)
                .map_or(0.0, |i| c.posterior[i]),
            regime: c.regime.clone(),
        })
        .collect();
    out.csv(
        "spectrum_conditions.csv",
        &[
            "condition_id",
            "distortion_type",
            "distortion_level",
            "delta",
            "mean_accuracy",
            "n_participants",
            "is_reference",
            "regime",
            "posterior",
        ],
        &rows,
    )?;
    out.svg("spectrum.svg", &svg::spectrum_strip(&s))?;
    out.finish(run.manifest("spectrum", None)?)
}

pub fn align(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let ds = run.dataset()?;
    let (report, cells) = run_align(&ds)?;
    let mut out = OutputDir::create(&run.out)?;
    out.json("alignment.json", &report)?;
    out.csv::<MetricCell>("metric_cells.csv", &METRIC_CELL_COLUMNS, &cells)?;
    out.csv::<HumanBaseline>(
        "human_baselines.csv",
        &["condition_id", "n_pairs", "ec", "ma", "combined"],
        &report.human_baselines,
    )?;
    out.finish(run.manifest("align", None)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct RankingRow {
    metric: RatioMetric,
    regime: String,
    rank: usize,
    model_id: String,
    family: Option<String>,
    mean_rho: f64,
    sd_rho: Option<f64>,
    n_conditions: usize,
    tied: bool,
}

#[derive(Debug, Serialize, Deserialize)]
struct RankTestCsvRow {
    metric: RatioMetric,
    regime: String,
    family_a: String,
    family_b: String,
    median_a: f64,
    median_b: f64,
    n_a: usize,
    n_b: usize,
    u: f64,
    p_value: f64,
    relation: String,
}

pub fn rank(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let align: AlignReport = run.prerequisite("alignment.json", "align")?;
    let spectrum: Spectrum = run.prerequisite("spectrum.json", "spectrum")?;
    let report = run_rank(&spectrum, &align)?;

    let mut out = OutputDir::create(&run.out)?;
    out.json("ranking.json", &report)?;
    out.csv(
        "ratios.csv",
        &[
            "model_id",
            "condition_id",
            "metric",
            "rho",
            "a_model",
            "a_human",
            "n_model_cells",
            "n_model_excluded",
            "n_human_cells",
            "n_human_excluded",
        ],
        &report.ratios.ratios,
    )?;
    let rows: Vec<RankingRow> = report
        .rankings
        .iter()
        .flat_map(|(metric, regimes)| {
            regimes.iter().flat_map(move |r| {
                r.entries.iter().map(move |e| RankingRow {
                    metric: *metric,
                    regime: r.regime.clone(),
                    rank: e.rank,
                    model_id: e.model_id.clone(),
                    family: e.family.clone(),
                    mean_rho: e.mean_rho,
                    sd_rho: e.sd_rho,
                    n_conditions: e.n_conditions,
                    tied: e.tied,
                })
            })
        })
        .collect();
    out.csv(
        "ranking.csv",
        &["metric", "regime", "rank", "model_id", "family", "mean_rho", "sd_rho", "n_conditions", "tied"],
        &rows,
    )?;
    let tests: Vec<RankTestCsvRow> = report
        .rank_tests
        .iter()
        .filter_map(|t| t.table.as_ref().map(|tab| (t, tab)))
        .flat_map(|(t, tab)| {
            tab.comparisons.iter().map(move |c| RankTestCsvRow {
                metric: t.metric,
                regime: t.regime.clone(),
                family_a: c.family_a.clone(),
                family_b: c.family_b.clone(),
                median_a: c.median_a,
                median_b: c.median_b,
                n_a: c.n_a,
                n_b: c.n_b,
                u: c.test.statistic,
                p_value: c.test.p_value,
                relation: c.relation.clone(),
            })
        })
        .collect();
    out.csv(
        "rank_tests.csv",
        &["metric", "regime", "family_a", "family_b", "median_a", "median_b", "n_a", "n_b", "u", "p_value", "relation"],
        &tests,
    )?;
    out.csv::<RadarRow>(
        "radar.csv",
        &["family", "distortion_type", "regime", "condition_id", "metric", "value", "rho", "n_models"],
        &report.radar,
    )?;
    let combined = report.rankings.get(&RatioMetric::Combined).cloned().unwrap_or_default();
    out.svg("ranking.svg", &svg::ranking_dots(&combined))?;
    out.finish(run.manifest("rank", None)?)
}

#[derive(Debug, Serialize, Deserialize)]
struct PermRow {
    analysis: String,
    scope: String,
    level: String,
    observed: Option<f64>,
    null_mean: Option<f64>,
    null_sd: Option<f64>,
    effect_size: Option<f64>,
    p_value: Option<f64>,
    n_permutations: usize,
    note: Option<String>,
}

pub fn permtest(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let align: AlignReport = run.prerequisite("alignment.json", "align")?;
    let spectrum: Spectrum = run.prerequisite("spectrum.json", "spectrum")?;
    let ds = run.dataset()?;
    let report = run_permtest(&ds, &spectrum, &align)?;

    let mut out = OutputDir::create(&run.out)?;
    out.json("permtest.json", &report)?;
    let mut rows = Vec::new();
    for t in &report.family_tests {
        rows.push(PermRow {
            analysis: "family".into(),
            scope: t.regime.clone(),
            level: t.level.clone(),
            observed: t.result.as_ref().map(|r| r.observed),
            null_mean: t.result.as_ref().map(|r| r.null_mean),
            null_sd: t.result.as_ref().and_then(|r| r.null_sd),
            effect_size: t.result.as_ref().and_then(|r| r.effect_size),
            p_value: t.result.as_ref().map(|r| r.p_value),
            n_permutations: report.n_perm,
            note: t.note.clone(),
        });
    }
    for s in &report.separability {
        let p = s.result.as_ref().map(|r| &r.permutation);
        rows.push(PermRow {
            analysis: "cled_separability".into(),
            scope: "human".into(),
            level: s.grouping.clone(),
            observed: s.result.as_ref().map(|r| r.cohens_d),
            null_mean: p.map(|r| r.null_mean),
            null_sd: p.and_then(|r| r.null_sd),
            effect_size: p.and_then(|r| r.effect_size),
            p_value: p.map(|r| r.p_value),
            n_permutations: report.n_perm,
            note: s.note.clone(),
        });
    }
    out.csv(
        "permtest.csv",
        &[
            "analysis",
            "scope",
            "level",
            "observed",
            "null_mean",
            "null_sd",
            "effect_size",
            "p_value",
            "n_permutations",
            "note",
        ],
        &rows,
    )?;
    out.matrix("human_cled.csv", &report.human_cled.labels, &report.human_cled.values)?;
    for v in &report.vectors {
        out.matrix(
            &format!("alignment_distances_{}.csv", v.regime),
            &v.distances.labels,
            &v.distances.values,
        )?;
    }
    out.finish(run.manifest("permtest", Some(report.n_perm))?)
}

pub fn stats(c: &Common) -> Result<(), CliError> {
    let run = resolve(c)?;
    let ds = run.dataset()?;
    let report = run_stats(&ds)?;
    let mut out = OutputDir::create(&run.out)?;
    out.json("stats.json", &report)?;
    out.csv(
        "stats_mann_whitney.csv",
        &["condition_id", "n", "n_reference", "u", "p_value", "p_adjusted", "significant"],
        &report.mann_whitney,
    )?;
    out.csv(
        "stats_binomial.csv",
        &["condition_id", "k", "n", "chance", "p_value", "p_adjusted", "reject"],
        &report.binomial,
    )?;
    out.csv(
        "stats_normality.csv",
        &["sample", "test", "statistic", "p_value", "note"],
        &report.normality,
    )?;
    out.finish(run.manifest("stats", None)?)
}

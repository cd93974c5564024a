use std::collections::BTreeMap;
use std::path::PathBuf;

use oodspec::analysis::{cled_group_separability, RatioMetric};
use oodspec::config::AnalysisConfig;
use oodspec::ingest::{build_response_sets, parse_trials, SystemKind, TrialTable};
use oodspec::metrics::{error_confusion, error_consistency};
use oodspec::pipeline::{run_align, run_permtest, run_rank, run_spectrum, run_stats, Dataset};
use oodspec::stats::{mean, sample_sd};
use oodspec::synth::{simulate_observers, ObserverSpec, ScenarioSpec};

fn data_dir(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("../../data").join(name)
}

fn config(name: &str) -> AnalysisConfig {
    AnalysisConfig::from_toml(&std::fs::read_to_string(data_dir(name).join("config.toml")).unwrap()).unwrap()
}

fn scenario(name: &str) -> ScenarioSpec {
    ScenarioSpec::from_toml(&std::fs::read_to_string(data_dir(name).join("scenario.toml")).unwrap()).unwrap()
}

fn fixture() -> (ScenarioSpec, TrialTable) {
    let cfg = config("fixture");
    let t = parse_trials(
        &data_dir("fixture").join("trials.csv"),
        Default::default(),
        &cfg.category_set().unwrap(),
    )
    .unwrap();
    (scenario("fixture"), t)
}

#[test]
fn committed_fixture_matches_its_scenario() {
    let (spec, table) = fixture();
    assert_eq!(table.len(), 1280);
    assert_eq!(build_response_sets(&table).len(), 8);
    assert_eq!(simulate_observers(&spec, spec.seed).unwrap(), table);
}

#[test]
fn fixture_accuracies_sit_in_their_binomial_intervals() {
    let (spec, table) = fixture();
    let sets = build_response_sets(&table);
    let by_id: BTreeMap<&str, &ObserverSpec> = spec.observers.iter().map(|o| (o.system_id.as_str(), o)).collect();
    for s in sets.values() {
        let cond = spec.conditions.iter().find(|c| c.condition() == s.condition).unwrap();
        let p = spec.accuracy(by_id[s.system_id.as_str()], cond);
        let n = s.n() as f64;
        // Two-sided 99% normal-approximation interval on the correct count.
        let half = 2.576 * (n * p * (1.0 - p)).sqrt() + 0.5;
        let k = s.n_correct() as f64;
        assert!((k - n * p).abs() <= half, "{}: {k} vs {}", s.system_id, n * p);
    }
}

#[test]
fn fixture_is_clean_and_confusions_tally() {
    let (_, table) = fixture();
    let ds = Dataset::new(config("fixture"), table);
    assert!(!ds.validate().has_errors());
    for s in ds.sets.values() {
        let f = error_confusion(s);
        for class in 0..s.n_categories {
            let direct = s.trials.iter().filter(|t| t.truth == class && t.response != class).count() as u64;
            assert_eq!(f.row(class).iter().sum::<u64>(), direct);
            assert_eq!(f.class_errors[class], direct);
        }
    }
}

#[test]
fn stats_flag_the_chance_condition() {
    let (_, table) = fixture();
    let r = run_stats(&Dataset::new(config("fixture"), table)).unwrap();
    let row = r.binomial.iter().find(|b| b.condition_id == "contrast_c05").unwrap();
    assert!(!row.reject);
}

fn pair_spec(coupling: f64, accuracy: f64, images: usize) -> ScenarioSpec {
    let toml = format!(
        r#"
        images_per_condition = {images}
        [[conditions]]
        distortion_type = "t"
        distortion_level = "1"
        [[observers]]
        system_id = "a"
        accuracy = {accuracy}
        coupling = {coupling}
        [[observers]]
        system_id = "b"
        accuracy = {accuracy}
        coupling = {coupling}
        "#
    );
    ScenarioSpec::from_toml(&toml).unwrap()
}

fn pair_ec(spec: &ScenarioSpec, seed: u64) -> f64 {
    let sets: Vec<_> = build_response_sets(&simulate_observers(spec, seed).unwrap()).into_values().collect();
    error_consistency(&sets[0], &sets[1]).unwrap().ec.value().unwrap()
}

// Equal accuracy p and coupling c give P(both correct) = c²p + (1 − c²)p²,
// hence kappa = c² in expectation.
#[test]
fn human_pair_ec_matches_coupling_squared() {
    let spec = pair_spec(0.6, 0.8, 2000);
    let ecs: Vec<f64> = (0..200).map(|s| pair_ec(&spec, s)).collect();
    let se = sample_sd(&ecs) / (ecs.len() as f64).sqrt();
    assert!((mean(&ecs) - 0.36).abs() < 3.0 * se + 0.005, "{} ± {se}", mean(&ecs));
}

#[test]
fn ec_rises_with_coupling() {
    let grid = [0.0, 0.25, 0.5, 0.75, 1.0];
    let means: Vec<f64> = grid
        .iter()
        .map(|&c| {
            let spec = pair_spec(c, 0.7, 400);
            mean(&(0..60).map(|s| pair_ec(&spec, s)).collect::<Vec<_>>())
        })
        .collect();
    assert!(means.windows(2).all(|w| w[1] > w[0]), "{means:?}");
    assert!(means[0].abs() < 0.02);
    assert!((means[4] - 1.0).abs() < 1e-12);
}

fn pipeline() -> Dataset {
    let spec = scenario("pipeline");
    Dataset::new(config("pipeline"), simulate_observers(&spec, spec.seed).unwrap())
}

#[test]
fn pipeline_spectrum_recovers_planted_regimes() {
    let ds = pipeline();
    let s = run_spectrum(&ds).unwrap();
    assert_eq!(s.selection.best_bic_k, 4);
    assert_eq!(s.selection.best_aicc_k, 4);
    let spec = scenario("pipeline");
    for c in &s.conditions {
        let planted = spec.conditions.iter().find(|x| x.condition() == c.score.condition).unwrap();
        let at_chance = planted.accuracy == Some(0.0625);
        assert_eq!(c.regime == "extreme-OOD", at_chance, "{}", c.condition_id);
    }
}

#[test]
fn pipeline_reports_planted_structure() {
    let mut ds = pipeline();
    ds.config.analysis.n_perm = 499;
    let s = run_spectrum(&ds).unwrap();
    let (align, _) = run_align(&ds).unwrap();
    let rank = run_rank(&s, &align).unwrap();

    // Planted coupling gradient: VLM > CNN > ViT by family mean ratio.
    for r in &rank.rankings[&RatioMetric::Combined] {
        let mut by_family: BTreeMap<String, Vec<f64>> = BTreeMap::new();
        for e in &r.entries {
            by_family.entry(e.family.clone().unwrap()).or_default().push(e.mean_rho);
        }
        let m = |f: &str| mean(&by_family[f]);
        assert!(m("VLM") > m("CNN") && m("CNN") > m("ViT"), "{}", r.regime);
    }
    let near = rank.rank_tests.iter().find(|t| t.metric == RatioMetric::Combined && t.regime == "near-OOD").unwrap();
    let relations: Vec<(String, String, String)> = near
        .table
        .as_ref()
        .unwrap()
        .comparisons
        .iter()
        .map(|c| (c.family_a.clone(), c.family_b.clone(), c.relation.clone()))
        .collect();
    assert!(relations.contains(&("VLM".into(), "CNN".into(), ">".into())));
    assert!(relations.contains(&("VLM".into(), "ViT".into(), ">".into())));

    let p = run_permtest(&ds, &s, &align).unwrap();
    let floor = 1.0 / 500.0;
    for t in p.family_tests.iter().filter(|t| t.level == "superfamily") {
        assert_eq!(t.result.as_ref().unwrap().p_value, floor, "{}", t.regime);
    }
    // Subfamilies differ in coupling and kernel, so members sit closer together.
    let v = p.vectors.iter().find(|v| v.regime == "near-OOD").unwrap();
    let sub: BTreeMap<String, String> = align
        .systems
        .iter()
        .filter(|(_, s)| s.kind == SystemKind::Model)
        .map(|(id, s)| (id.clone(), s.subfamily.clone().unwrap()))
        .collect();
    let sep = cled_group_separability(&v.distances, &sub, 199, 1).unwrap();
    assert!(sep.cohens_d < 0.0);
    let by_regime = p.separability.iter().find(|r| r.grouping == "ood_regime").unwrap();
    assert!(by_regime.result.as_ref().unwrap().cohens_d < 0.0);
}

#[test]
fn model_copying_a_human_exceeds_human_level() {
    let (_, table) = fixture();
    let mut records = table.records().to_vec();
    let copies: Vec<_> = records
        .iter()
        .filter(|r| r.system_id == "subject-01")
        .map(|r| {
            let mut c = r.clone();
            c.system_id = "copycat".into();
            c.system_kind = SystemKind::Model;
            c
        })
        .collect();
    records.extend(copies);
    let table = TrialTable::new(table.categories().clone(), records).unwrap();
    let (align, _) = run_align(&Dataset::new(config("fixture"), table)).unwrap();
    let ratios = oodspec::analysis::all_ratios(&align.records);
    let r = ratios
        .for_metric(RatioMetric::Ec)
        .find(|r| r.model_id == "copycat" && r.condition_id == "contrast_c100")
        .unwrap();
    assert!(r.rho > 1.0 && r.rho.is_finite(), "{}", r.rho);
}

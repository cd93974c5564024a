use std::collections::BTreeMap;

use oodspec::analysis::{
    alignment_ratio, rank_models, AlignmentRatio, AlignmentRecord, PairKind, RatioMetric, Representative,
    Representatives,
};
use oodspec::ingest::{
    build_response_sets, parse_trials_reader, write_canonical, CategorySet, Condition, InputFormat, SystemKind,
    TrialRecord, TrialTable,
};
use oodspec::metrics::MetricValue;
use oodspec::spectrum::{assign_regimes, fit_gmm_1d};
use oodspec::stats::OodScore;
use proptest::prelude::*;

fn record(a: &str, b: &str, ec: f64, ma: f64) -> AlignmentRecord {
    let kind = |s: &str| if s.starts_with("subject") { SystemKind::Human } else { SystemKind::Model };
    AlignmentRecord {
        condition: Condition::new("c", "1"),
        system_a: a.into(),
        system_b: b.into(),
        kind: PairKind::of(kind(a), kind(b)),
        kind_a: kind(a),
        kind_b: kind(b),
        ec: MetricValue::Defined(ec),
        ma: MetricValue::Defined(ma),
        n: 100,
        n_joint_errors: 10,
    }
}

fn table() -> impl Strategy<Value = TrialTable> {
    let row = (0usize..3, 0usize..2, 0usize..12, 0usize..4, 0usize..4, any::<bool>());
    prop::collection::vec(row, 1..80).prop_map(|rows| {
        let cats = CategorySet::new(["a", "b", "c", "d"]).unwrap();
        let mut seen = std::collections::BTreeSet::new();
        let records = rows
            .into_iter()
            .filter(|(s, l, img, ..)| seen.insert((*s, *l, *img)))
            .map(|(s, l, img, t, r, fam)| TrialRecord {
                system_id: format!("sys{s}"),
                system_kind: if s == 0 { SystemKind::Human } else { SystemKind::Model },
                family: fam.then(|| "F".to_string()),
                subfamily: None,
                distortion_type: "blur".into(),
                distortion_level: l.to_string(),
                image_id: format!("im{img:02}"),
                true_category: t,
                response_category: r,
                session_id: None,
                trial_index: Some(img as u64),
            })
            .collect();
        TrialTable::new(cats, records).unwrap()
    })
}

proptest! {
    #[test]
    fn ratio_is_scale_invariant(
        h in prop::collection::vec((0.05f64..1.0, 0.05f64..1.0), 1..6),
        m in prop::collection::vec((-1.0f64..1.0, -1.0f64..1.0), 1..6),
        scale in 0.01f64..100.0,
    ) {
        let hh: Vec<_> = h.iter().enumerate().map(|(i, &(e, a))| record("subject-1", &format!("subject-{}", i + 2), e, a)).collect();
        let hm: Vec<_> = m.iter().enumerate().map(|(i, &(e, a))| record(&format!("subject-{}", i + 2), "model", e, a)).collect();
        let scaled = |v: &[AlignmentRecord]| -> Vec<AlignmentRecord> {
            v.iter().map(|r| {
                let mut r = r.clone();
                r.ec = MetricValue::Defined(r.ec.value().unwrap() * scale);
                r.ma = MetricValue::Defined(r.ma.value().unwrap() * scale);
                r
            }).collect()
        };
        let (hh2, hm2) = (scaled(&hh), scaled(&hm));
        for metric in RatioMetric::ALL {
            let r1 = alignment_ratio("model", "c_1", &hm.iter().collect::<Vec<_>>(), &hh.iter().collect::<Vec<_>>(), metric).unwrap();
            let r2 = alignment_ratio("model", "c_1", &hm2.iter().collect::<Vec<_>>(), &hh2.iter().collect::<Vec<_>>(), metric).unwrap();
            prop_assert!((r1.rho - r2.rho).abs() <= 1e-9 * r1.rho.abs().max(1.0));
        }
    }

    #[test]
    fn ranking_is_affine_invariant(
        rhos in prop::collection::vec(prop::collection::vec(-2.0f64..2.0, 2), 2..10),
        a in 0.1f64..10.0,
        b in -5.0f64..5.0,
    ) {
        let make = |f: &dyn Fn(f64) -> f64| -> Vec<AlignmentRatio> {
            rhos.iter().enumerate().flat_map(|(m, v)| {
                v.iter().enumerate().map(move |(c, &rho)| (m, c, rho))
            }).map(|(m, c, rho)| AlignmentRatio {
                model_id: format!("m{m:02}"),
                condition_id: format!("t{c}_1"),
                metric: RatioMetric::Combined,
                rho: f(rho),
                a_model: rho,
                a_human: 1.0,
                n_model_cells: 1,
                n_model_excluded: 0,
                n_human_cells: 1,
                n_human_excluded: 0,
            }).collect()
        };
        let reps = Representatives {
            entries: (0..2).map(|c| Representative {
                distortion_type: format!("t{c}"),
                regime: "near-OOD".into(),
                condition_id: format!("t{c}_1"),
                delta: -3.0,
                distance: 0.0,
                tie: false,
            }).collect(),
            absent: vec![],
        };
        let base = make(&|x| x);
        let moved = make(&|x| a * x + b);
        let order = |rs: &[AlignmentRatio]| -> Vec<String> {
            let refs: Vec<&AlignmentRatio> = rs.iter().collect();
            rank_models(&refs, &["near-OOD".to_string()], &reps, &BTreeMap::new())[0]
                .entries.iter().map(|e| e.model_id.clone()).collect()
        };
        // Means that differ only in the last bits may swap; compare on separated data.
        let means: Vec<f64> = rhos.iter().map(|v| v.iter().sum::<f64>() / 2.0).collect();
        let mut sorted = means.clone();
        sorted.sort_by(f64::total_cmp);
        prop_assume!(sorted.windows(2).all(|w| w[1] - w[0] > 1e-6));
        prop_assert_eq!(order(&base), order(&moved));
    }

    #[test]
    fn assignment_is_translation_equivariant(
        shift in -50.0f64..50.0,
        seed in 0u64..1000,
    ) {
        use rand::SeedableRng;
        use rand_distr::{Distribution, Normal};
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
        let data: Vec<f64> = (0..30)
            .map(|i| Normal::new([0.0, -4.0, -9.0][i % 3], 0.5).unwrap().sample(&mut rng))
            .collect();
        let fit = fit_gmm_1d(&data, 3, seed, 3).unwrap();
        let mut moved = fit.clone();
        for m in &mut moved.means {
            *m += shift;
        }
        let scores = |off: f64| -> Vec<OodScore> {
            data.iter().enumerate().map(|(i, d)| OodScore {
                condition: Condition::new("t", i.to_string()),
                delta: d + off,
                mean_logit_distorted: 0.0,
                reference_mean: 0.0,
                reference_sd: 1.0,
            }).collect()
        };
        let a = assign_regimes(&fit, &scores(0.0));
        let b = assign_regimes(&moved, &scores(shift));
        for (id, ra) in &a.responsibilities {
            let rb = &b.responsibilities[id];
            for (x, y) in ra.iter().zip(rb) {
                prop_assert!((x - y).abs() < 1e-6, "{x} vs {y}");
            }
        }
        for (x, y) in a.boundaries.iter().zip(&b.boundaries) {
            prop_assert!((x + shift - y).abs() < 1e-6);
        }
    }

    #[test]
    fn grouping_ignores_row_order(t in table(), seed in any::<u64>()) {
        use rand::seq::SliceRandom;
        use rand::SeedableRng;
        let mut rows = t.records().to_vec();
        rows.shuffle(&mut rand_chacha::ChaCha8Rng::seed_from_u64(seed));
        let shuffled = TrialTable::new(t.categories().clone(), rows).unwrap();
        prop_assert_eq!(build_response_sets(&t), build_response_sets(&shuffled));
    }

    #[test]
    fn canonical_csv_round_trips(t in table()) {
        let mut buf = Vec::new();
        write_canonical(&t, &mut buf).unwrap();
        let back = parse_trials_reader(buf.as_slice(), InputFormat::Canonical, t.categories(), None).unwrap();
        prop_assert_eq!(back, t);
    }
}

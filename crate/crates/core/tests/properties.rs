use fairsumm_core::attribution::{rule_match, softmax_distribution, ScoreVector};
use fairsumm_core::ingest::{parse_line, serialize_sample, KeyPolicy};
use fairsumm_core::metrics::{auc, bur, evaluate_sample, sof, uer, underrepresentation_gaps};
use fairsumm_core::model::{
    normalize_distribution, AttributeSpec, FairnessConfig, GoldPolicy, Provenance, Sample, SourceUnit, SplitMode,
    SummaryRecord, ValueDistribution,
};
use fairsumm_core::AttributionResult;
use proptest::prelude::*;

fn raw_weights(max_r: usize) -> impl Strategy<Value = Vec<f64>> {
    (2..=max_r)
        .prop_flat_map(|r| prop::collection::vec(0.0f64..10.0, r))
        .prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-6)
}

fn pair(max_r: usize) -> impl Strategy<Value = (ValueDistribution, ValueDistribution)> {
    (2..=max_r).prop_flat_map(|r| {
        let v = prop::collection::vec(0.0f64..1.0, r).prop_filter("mass", |w| w.iter().sum::<f64>() > 1e-6);
        (v.clone(), v).prop_map(|(a, b)| {
            (
                normalize_distribution(&a, Provenance::Target).unwrap(),
                normalize_distribution(&b, Provenance::Gold).unwrap(),
            )
        })
    })
}

fn permutation(r: usize) -> impl Strategy<Value = Vec<usize>> {
    Just((0..r).collect::<Vec<_>>()).prop_shuffle()
}

proptest! {
    #[test]
    fn normalization_sums_to_one(raw in raw_weights(6)) {
        let d = normalize_distribution(&raw, Provenance::Source).unwrap();
        prop_assert!((d.weights().iter().sum::<f64>() - 1.0).abs() <= 1e-9);
        prop_assert!(ValueDistribution::new(d.weights().to_vec(), Provenance::Source).is_ok());
    }

    #[test]
    fn normalization_is_scale_invariant(raw in raw_weights(6), c in 1e-3f64..1e3) {
        let a = normalize_distribution(&raw, Provenance::Source).unwrap();
        let scaled: Vec<f64> = raw.iter().map(|w| w * c).collect();
        let b = normalize_distribution(&scaled, Provenance::Source).unwrap();
        for (x, y) in a.weights().iter().zip(b.weights()) {
            prop_assert!((x - y).abs() <= 1e-12);
        }
    }

    #[test]
    fn bur_is_monotone_in_tolerance((py, pg) in pair(5), t1 in 0.0f64..=1.0, t2 in 0.0f64..=1.0) {
        let (lo, hi) = if t1 <= t2 { (t1, t2) } else { (t2, t1) };
        prop_assert!(bur(&py, &pg, lo).unwrap().indicator() <= bur(&py, &pg, hi).unwrap().indicator());
    }

    #[test]
    fn tolerance_zero_is_fair((py, pg) in pair(5)) {
        prop_assert!(!bur(&py, &pg, 0.0).unwrap().unfair);
    }

    #[test]
    fn excess_equals_deficit((py, pg) in pair(6)) {
        let excess: f64 = py.weights().iter().zip(pg.weights()).map(|(y, g)| (y - g).max(0.0)).sum();
        let deficit: f64 = underrepresentation_gaps(&py, &pg).unwrap().iter().sum();
        prop_assert!((excess - deficit).abs() <= 1e-12);
    }

    #[test]
    fn metric_ranges((py, pg) in pair(5), grid in 1usize..40) {
        let a = auc(&py, &pg, grid).unwrap();
        prop_assert!((0.0..=1.0).contains(&a));
        let u = uer(&py, &pg).unwrap();
        prop_assert!((0.0..=1.0).contains(&u));
        prop_assert!(sof(&[underrepresentation_gaps(&py, &pg).unwrap()]).unwrap() >= 0.0);
    }

    #[test]
    fn metrics_are_permutation_equivariant(
        (py, pg, order) in pair(5).prop_flat_map(|(a, b)| { let r = a.len(); (Just(a), Just(b), permutation(r)) }),
        tau in 0.0f64..=1.0,
    ) {
        let (qy, qg) = (py.permuted(&order), pg.permuted(&order));
        let base = bur(&py, &pg, tau).unwrap();
        let perm = bur(&qy, &qg, tau).unwrap();
        prop_assert_eq!(base.unfair, perm.unfair);
        let mut mapped: Vec<usize> = perm.underrepresented.iter().map(|&i| order[i]).collect();
        mapped.sort();
        prop_assert_eq!(mapped, base.underrepresented);
        prop_assert!((uer(&py, &pg).unwrap() - uer(&qy, &qg).unwrap()).abs() <= 1e-12);
        prop_assert_eq!(auc(&py, &pg, 10).unwrap(), auc(&qy, &qg, 10).unwrap());
        let s1 = sof(&[underrepresentation_gaps(&py, &pg).unwrap()]).unwrap();
        let s2 = sof(&[underrepresentation_gaps(&qy, &qg).unwrap()]).unwrap();
        prop_assert!((s1 - s2).abs() <= 1e-12);
    }

    #[test]
    fn softmax_shift_and_monotonicity(
        scores in prop::collection::vec(-20.0f64..20.0, 2..6),
        shift in -100.0f64..100.0,
        t in 0.05f64..5.0,
    ) {
        let base = softmax_distribution(&ScoreVector::new(scores.clone()).unwrap(), t).unwrap();
        let shifted: Vec<f64> = scores.iter().map(|s| s + shift).collect();
        let moved = softmax_distribution(&ScoreVector::new(shifted).unwrap(), t).unwrap();
        for (a, b) in base.weights().iter().zip(moved.weights()) {
            prop_assert!((a - b).abs() <= 1e-12);
        }
        for i in 0..scores.len() {
            for j in 0..scores.len() {
                if scores[i] > scores[j] {
                    prop_assert!(base.get(i) >= base.get(j));
                }
            }
        }
    }

    #[test]
    fn lower_temperature_sharpens(scores in prop::collection::vec(-5.0f64..5.0, 2..6), t in 0.01f64..5.0, f in 0.1f64..1.0) {
        let sv = ScoreVector::new(scores).unwrap();
        let hot = softmax_distribution(&sv, t).unwrap();
        let cold = softmax_distribution(&sv, t * f).unwrap();
        let max = |d: &ValueDistribution| d.weights().iter().copied().fold(0.0, f64::max);
        prop_assert!(max(&cold) >= max(&hot) - 1e-15);
    }
}

const WORDS: &[&str] = &[
    "claritin", "works", "great", "sneeze", "pills", "allergy", "made", "me", "day", "night",
];

fn text() -> impl Strategy<Value = String> {
    prop::collection::vec(prop::sample::select(WORDS), 1..8).prop_map(|w| w.join(" "))
}

fn sample_strategy() -> impl Strategy<Value = (Sample, SummaryRecord)> {
    (prop::collection::vec((text(), 0usize..3), 1..6), text()).prop_map(|(units, summary)| {
        let attr = AttributeSpec::new("grp", vec!["a".into(), "b".into(), "c".into()]).unwrap();
        let units = units
            .into_iter()
            .map(|(t, v)| SourceUnit::new(t, attr.values[v].clone()))
            .collect();
        (Sample::new("p", attr, units), SummaryRecord::new("sys", summary))
    })
}

proptest! {
    #[test]
    fn duplicated_summary_keeps_distribution((sample, summary) in sample_strategy()) {
        let doubled = SummaryRecord::new("sys", format!("{} {}", summary.text, summary.text));
        match rule_match(&sample, &summary, 1, SplitMode::Fractional) {
            Ok(a) => {
                let b = rule_match(&sample, &doubled, 1, SplitMode::Fractional).unwrap();
                // fractional shares accumulate in a different order, so allow rounding
                for (x, y) in a.target_distribution.weights().iter().zip(b.target_distribution.weights()) {
                    prop_assert!((x - y).abs() <= 1e-12);
                }
                prop_assert_eq!(a.hallucination_mass, b.hallucination_mass);
                prop_assert_eq!(b.assignments.len(), 2 * a.assignments.len());
            }
            Err(_) => prop_assert!(rule_match(&sample, &doubled, 1, SplitMode::Fractional).is_err()),
        }
    }

    #[test]
    fn unique_tokens_give_one_hot(n in 1usize..5) {
        let attr = AttributeSpec::new("g", vec!["x".into(), "y".into()]).unwrap();
        let s = Sample::new("s", attr, vec![
            SourceUnit::new("only here shared", "x"),
            SourceUnit::new("elsewhere shared", "y"),
        ]);
        let summary = SummaryRecord::new("sys", vec!["only here"; n].join(" "));
        let r = rule_match(&s, &summary, 1, SplitMode::Fractional).unwrap();
        prop_assert_eq!(r.target_distribution.weights(), &[1.0, 0.0]);
    }

    #[test]
    fn corpus_line_round_trip((mut sample, summary) in sample_strategy(), gold in prop::option::of(prop::collection::vec(0.1f64..5.0, 3))) {
        sample.summaries.push(summary);
        sample.gold_override = gold.map(|weights| GoldPolicy::Custom { weights });
        let line = serialize_sample(&sample).unwrap();
        let (back, warnings) = parse_line(&line, 1, KeyPolicy::Strict).unwrap();
        prop_assert_eq!(back, sample);
        prop_assert!(warnings.is_empty());
    }

    #[test]
    fn sample_metrics_permutation_equivariant((sample, summary) in sample_strategy(), order in permutation(3)) {
        let config = FairnessConfig::default();
        let Ok(attr) = rule_match(&sample, &summary, 1, SplitMode::Fractional) else { return Ok(()); };
        let Ok(base) = evaluate_sample(&sample, "sys", &attr, &config) else { return Ok(()); };

        let mut permuted = sample.clone();
        permuted.attribute.values = order.iter().map(|&i| sample.attribute.values[i].clone()).collect();
        let attr2 = rule_match(&permuted, &summary, 1, SplitMode::Fractional).unwrap();
        let m = evaluate_sample(&permuted, "sys", &attr2, &config).unwrap();
        prop_assert_eq!(m.bur, base.bur);
        prop_assert!((m.uer - base.uer).abs() <= 1e-12);
        prop_assert_eq!(m.auc, base.auc);
        prop_assert!((m.sof - base.sof).abs() <= 1e-12);
        for (i, &src) in order.iter().enumerate() {
            prop_assert!((m.target[i] - base.target[src]).abs() <= 1e-12);
            prop_assert!((m.per_value_gap[i] - base.per_value_gap[src]).abs() <= 1e-12);
        }
        let mut a = m.underrepresented_values.clone();
        let mut b = base.underrepresented_values.clone();
        a.sort();
        b.sort();
        prop_assert_eq!(a, b);
    }
}

#[test]
fn identity_attribution_is_fair_at_every_tolerance() {
    let attr = AttributeSpec::new("g", vec!["x".into(), "y".into()]).unwrap();
    let s = Sample::new(
        "s",
        attr,
        vec![SourceUnit::new("a b c", "x"), SourceUnit::new("d", "y")],
    );
    let px = fairsumm_core::attribution::source_distribution(&s).unwrap();
    let attribution = AttributionResult {
        target_distribution: px.with_provenance(Provenance::Target),
        assignments: vec![],
        hallucination_mass: 0.0,
        matcher_id: "identity".into(),
    };
    for step in 0..=20 {
        let config = FairnessConfig {
            tolerance: step as f64 / 20.0,
            ..Default::default()
        };
        let m = evaluate_sample(&s, "id", &attribution, &config).unwrap();
        assert_eq!((m.bur, m.uer, m.auc), (0, 0.0, 0.0));
    }
}

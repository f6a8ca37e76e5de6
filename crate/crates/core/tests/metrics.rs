use csk_probe::eval_metrics::{
    EvalRecord, GroupBy, aggregate, build_records, paired_significance, precision_recall_at_k, rank_of, reciprocal_rank,
};
use csk_probe::probe_builder::{DatasetTag, MaskedSlot, Probe, TypicalityBand};
use csk_probe::scorer::RankedPrediction;
use csk_probe::{Error, eval_metrics};
use proptest::prelude::*;

fn prediction(id: &str, tokens: &[&str]) -> RankedPrediction {
    RankedPrediction {
        probe_id: id.into(),
        candidates: tokens.iter().enumerate().map(|(i, t)| (t.to_string(), -(i as f64))).collect(),
    }
}

fn probe(id: &str, text: &str, gold: &str, band: Option<TypicalityBand>) -> Probe {
    Probe {
        probe_id: id.into(),
        text: text.into(),
        gold: gold.into(),
        masked_slot: MaskedSlot::Object,
        dataset_tag: DatasetTag::Conceptnet,
        typicality_band: band,
    }
}

#[test]
fn hand_checked_values() {
    let records: Vec<EvalRecord> = [1, 2, 4]
        .iter()
        .enumerate()
        .map(|(i, &r)| EvalRecord::from_rank(format!("p{i}"), Some(r), DatasetTag::Cslb))
        .collect();
    let agg = aggregate(&records, GroupBy::All, &[1, 10]).unwrap();
    let r = &agg.reports[0];
    assert!((r.mrr - 0.583_333_333_3).abs() < 1e-9);
    assert_eq!(r.hits_at[&1], 1.0 / 3.0);
    assert_eq!(r.hits_at[&10], 1.0);
    assert_eq!(r.median_rr, 0.5);
    let p = prediction("q", &["a", "b", "gold1", "c", "d"]);
    assert_eq!(precision_recall_at_k(&p, &["gold1", "gold2", "gold3", "gold4"], 5).unwrap(), (0.2, 0.25));
}

#[test]
fn rank_lookup_is_case_insensitive() {
    let p = prediction("q", &["Eat", "walk", "sleep"]);
    assert_eq!(rank_of(&p, "eat"), Some(1));
    assert_eq!(reciprocal_rank(&p, "sleep"), 1.0 / 3.0);
    assert_eq!(reciprocal_rank(&p, "bite"), 0.0);
}

#[test]
fn records_require_predictions() {
    let probes = vec![probe("a", "X [MASK].", "y", None), probe("b", "Z [MASK].", "w", None)];
    let preds = vec![prediction("a", &["y"])];
    assert!(matches!(build_records(&probes, &preds, false), Err(Error::Unpaired { .. })));
}

#[test]
fn multi_gold_merges_probes_with_same_text() {
    let probes = vec![
        probe("b", "Bears [MASK].", "eat", None),
        probe("a", "Bears [MASK].", "sleep", None),
        probe("c", "Cats [MASK].", "purr", None),
    ];
    let preds = vec![
        prediction("a", &["sleep", "walk", "eat"]),
        prediction("b", &["sleep", "walk", "eat"]),
        prediction("c", &["nap"]),
    ];
    let records = build_records(&probes, &preds, true).unwrap();
    assert_eq!(records.len(), 2);
    let bears = records.iter().find(|r| r.golds.len() == 2).unwrap();
    assert_eq!(bears.probe_id, "a");
    assert_eq!(bears.gold_ranks, [1, 3]);
    assert_eq!(bears.recall_at(3), 1.0);
}

#[test]
fn grouping_by_band_warns_on_empty_groups() {
    let probes = vec![
        probe("a", "A [MASK].", "x", Some(TypicalityBand::VeryTypical)),
        probe("b", "B [MASK].", "x", Some(TypicalityBand::Plausible)),
    ];
    let preds = vec![prediction("a", &["x"]), prediction("b", &["y", "x"])];
    let agg = aggregate(&build_records(&probes, &preds, false).unwrap(), GroupBy::TypicalityBand, &[1]).unwrap();
    let groups: Vec<&str> = agg.reports.iter().map(|r| r.group.as_str()).collect();
    assert_eq!(groups, ["very_typical", "plausible"]);
    assert_eq!(agg.warnings.len(), 1);
}

#[test]
fn zero_k_is_rejected() {
    let records = vec![EvalRecord::from_rank("a", Some(1), DatasetTag::Cslb)];
    assert!(aggregate(&records, GroupBy::All, &[0]).is_err());
    assert!(precision_recall_at_k(&prediction("a", &["x"]), &["x"], 0).is_err());
}

fn candidates() -> impl Strategy<Value = Vec<String>> {
    prop::collection::btree_set("[a-f]{1,2}", 0..12).prop_map(|s| s.into_iter().collect::<Vec<String>>()).prop_shuffle()
}

fn records_strategy() -> impl Strategy<Value = Vec<(Vec<String>, Vec<String>)>> {
    prop::collection::vec((candidates(), prop::collection::vec("[a-f]{1,2}", 1..4)), 1..30)
}

fn to_records(data: &[(Vec<String>, Vec<String>)], transform: impl Fn(f64) -> f64) -> Vec<EvalRecord> {
    data.iter()
        .enumerate()
        .map(|(i, (cands, golds))| {
            let p = RankedPrediction {
                probe_id: format!("p{i}"),
                candidates: cands.iter().enumerate().map(|(r, t)| (t.clone(), transform(-(r as f64)))).collect(),
            };
            EvalRecord::new(format!("p{i}"), golds, &p, DatasetTag::Conceptnet, None).unwrap()
        })
        .collect()
}

fn rank_records(ranks: &[Option<usize>]) -> Vec<EvalRecord> {
    ranks
        .iter()
        .enumerate()
        .map(|(i, &r)| EvalRecord::from_rank(format!("p{i:04}"), r, DatasetTag::Conceptnet))
        .collect()
}

proptest! {
    #[test]
    fn metric_invariants(data in records_strategy()) {
        let records = to_records(&data, |s| s);
        let ks: Vec<usize> = (1..=12).collect();
        let r = &aggregate(&records, GroupBy::All, &ks).unwrap().reports[0];
        for w in ks.windows(2) {
            prop_assert!(r.hits_at[&w[0]] <= r.hits_at[&w[1]]);
        }
        // Candidate lists hold at most 12 tokens, so Hits@12 counts every returned gold.
        prop_assert!(r.hits_at[&1] <= r.mrr + 1e-12 && r.mrr <= r.hits_at[&12] + 1e-12);
        prop_assert!((0.0..=1.0).contains(&r.mrr) && (0.0..=1.0).contains(&r.median_rr));
        for (rec, (cands, golds)) in records.iter().zip(&data) {
            let p = RankedPrediction { probe_id: rec.probe_id.clone(), candidates: cands.iter().map(|t| (t.clone(), 0.0)).collect() };
            for &k in &ks {
                let (prec, rec_k) = precision_recall_at_k(&p, golds, k).unwrap();
                let a = prec * k as f64;
                let b = rec_k * rec.golds.len() as f64;
                prop_assert!((a - a.round()).abs() < 1e-9 && (a - b).abs() < 1e-9);
                prop_assert_eq!(prec, rec.precision_at(k));
            }
        }
    }

    #[test]
    fn only_ranks_matter(data in records_strategy(), scale in 0.01f64..100.0, shift in -50.0f64..50.0) {
        let ks = [1, 3, 10];
        let plain = aggregate(&to_records(&data, |s| s), GroupBy::All, &ks).unwrap();
        let affine = aggregate(&to_records(&data, |s| s * scale + shift), GroupBy::All, &ks).unwrap();
        let exp = aggregate(&to_records(&data, f64::exp), GroupBy::All, &ks).unwrap();
        prop_assert_eq!(&plain, &affine);
        prop_assert_eq!(&plain, &exp);
    }

    #[test]
    fn significance_is_symmetric(a in prop::collection::vec(prop::option::of(1usize..20), 1..60), shift in prop::collection::vec(-3i64..4, 60), seed in any::<u64>()) {
        let b: Vec<Option<usize>> = a.iter().zip(&shift).map(|(r, s)| r.map(|r| (r as i64 + s).max(1) as usize)).collect();
        let (ra, rb) = (rank_records(&a), rank_records(&b));
        let ab = paired_significance(&ra, &rb, 500, seed).unwrap();
        let ba = paired_significance(&rb, &ra, 500, seed).unwrap();
        prop_assert_eq!(ab, ba);
        prop_assert!((0.0..=1.0).contains(&ab));
        prop_assert_eq!(paired_significance(&ra, &ra, 200, seed).unwrap(), 1.0);
    }

    #[test]
    fn bootstrap_ranges_add_up(diffs in prop::collection::vec(-1.0f64..1.0, 1..40), seed in any::<u64>(), cut in 0u64..300) {
        let boot = eval_metrics::Bootstrap::new(diffs, seed).unwrap();
        prop_assert_eq!(boot.count_flips(0..cut) + boot.count_flips(cut..300), boot.count_flips(0..300));
    }
}

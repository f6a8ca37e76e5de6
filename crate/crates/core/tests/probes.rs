mod common;

use std::collections::HashMap;

use csk_probe::probe_builder::{
    DatasetTag, MaskMode, MaskedSlot, Probe, ProbeOptions, SkipReason, Triple, TypicalityBand, assign_typicality_band,
    build_probes, build_template_probe, mask_last_occurrence, parse_triples, read_probes_jsonl, write_probes_jsonl,
};
use csk_probe::scorer::{DEFAULT_MASK_MARKER, MockScorer};
use csk_probe::{Document, Segmenter, synth};
use proptest::prelude::*;

fn vocab_for(triples: &[Triple]) -> MockScorer {
    let docs: Vec<Document> = triples
        .iter()
        .enumerate()
        .map(|(i, t)| {
            let text = format!("{} {} {} {}", t.subject, t.predicate, t.object, t.source_sentence.as_deref().unwrap_or(""));
            Document::new(format!("v{i}"), text).unwrap()
        })
        .collect();
    MockScorer::from_documents(Segmenter::global(), &docs).unwrap()
}

fn surfaces(text: &str) -> Vec<String> {
    Segmenter::global().tokenize(text).iter().map(|t| t.surface.to_string()).collect()
}

fn sentence_by_id(triples: &[Triple], options: &ProbeOptions) -> HashMap<String, String> {
    triples
        .iter()
        .filter_map(|t| Some((csk_probe::probe_builder::probe_id(t, options), t.source_sentence.clone()?)))
        .collect()
}

#[test]
fn masks_last_token_aligned_occurrence() {
    let seg = Segmenter::global();
    let m = |s: &str, t: &str| mask_last_occurrence(seg, s, t, DEFAULT_MASK_MARKER);
    assert_eq!(m("A cat sees a cat.", "cat").unwrap(), "A cat sees a [MASK].");
    assert_eq!(m("Cats and a cat, catalog.", "cat").unwrap(), "Cats and a [MASK], catalog.");
    assert_eq!(m("The Cat sat.", "cat"), Err(SkipReason::NotInSentence));
    assert_eq!(m("The [MASK] sat.", "sat"), Err(SkipReason::MarkerInSentence));
    assert_eq!(m("You can't stop.", "can"), Err(SkipReason::NotInSentence));
}

#[test]
fn template_masks_property_tail() {
    assert_eq!(build_template_probe("mug", "hold tea", "[MASK]").unwrap(), ("Mug hold [MASK].".to_string(), "tea".to_string()));
    assert!(build_template_probe("mug", "tea", "[MASK]").is_err());
}

#[test]
fn typicality_bands() {
    for (s, band) in [
        (1.0, TypicalityBand::VeryTypical),
        (1.99, TypicalityBand::VeryTypical),
        (2.0, TypicalityBand::Typical),
        (2.99, TypicalityBand::Typical),
        (3.0, TypicalityBand::Plausible),
        (3.99, TypicalityBand::Plausible),
    ] {
        assert_eq!(assign_typicality_band(s).unwrap(), band, "{s}");
    }
    assert!(assign_typicality_band(4.0).is_err());
    assert!(assign_typicality_band(0.5).is_err());
}

#[test]
fn triple_file_parsing() {
    let tsv = "bear\teat\tfish\t1.5\tBears eat fish.\nmug\thold\ttea\n#x\n\ncat\tsit\tmat\t\tThe cat sat on the mat.\n";
    let t = parse_triples(tsv.as_bytes(), "t.tsv").unwrap();
    assert_eq!(t.len(), 3);
    assert_eq!(t[0].typicality_score, Some(1.5));
    assert_eq!(t[1].source_sentence, None);
    assert_eq!(t[2].typicality_score, None);
    assert!(parse_triples("a\tb\n".as_bytes(), "t.tsv").is_err());
    assert!(parse_triples("a\tb\tc\t7\n".as_bytes(), "t.tsv").is_err());
    assert!(parse_triples("a\t\tc\n".as_bytes(), "t.tsv").is_err());
}

#[test]
fn out_of_vocabulary_gold_is_skipped() {
    let triples = vec![
        Triple::new("bear", "eat", "fish").with_sentence("Bears eat fish."),
        Triple::new("bear", "eat", "honey").with_sentence("Bears eat honey."),
        Triple::new("dog", "chase", "cat").with_score(4.0).with_sentence("Dogs chase a cat."),
    ];
    let mut vocab = MockScorer::from_counts([("fish".to_string(), 3), ("cat".to_string(), 1)].into()).unwrap();
    let set = build_probes(&triples, &ProbeOptions::new(MaskMode::Object, DatasetTag::Conceptnet), &mut vocab).unwrap();
    assert_eq!(set.probes.len(), 1);
    assert_eq!(set.probes[0].text, "Bears eat [MASK].");
    let reasons: Vec<SkipReason> = set.skips.iter().map(|s| s.reason).collect();
    assert_eq!(reasons, [SkipReason::MultiToken, SkipReason::TypicalityOutOfRange]);
}

#[test]
fn probes_round_trip_through_jsonl() {
    let triples = synth::triples(200, 3);
    let mut vocab = vocab_for(&triples);
    let set = build_probes(&triples, &ProbeOptions::new(MaskMode::Predicate, DatasetTag::Cslb), &mut vocab).unwrap();
    assert!(!set.probes.is_empty());
    let mut buf = Vec::new();
    write_probes_jsonl(&mut buf, &set.probes).unwrap();
    let back: Vec<Probe> = read_probes_jsonl(buf.as_slice(), "p.jsonl").unwrap();
    assert_eq!(back, set.probes);
    assert!(back.iter().all(|p| p.masked_slot == MaskedSlot::Predicate));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn emitted_probes_round_trip_and_conserve(seed in any::<u64>(), mode in prop::sample::select(vec![MaskMode::Object, MaskMode::Predicate])) {
        let triples = synth::triples(120, seed);
        let options = ProbeOptions::new(mode, DatasetTag::QuasimodoEval);
        let mut vocab = vocab_for(&triples);
        let set = build_probes(&triples, &options, &mut vocab).unwrap();
        prop_assert_eq!(set.probes.len() + set.skips.len(), triples.len());
        let sentences = sentence_by_id(&triples, &options);
        for p in &set.probes {
            prop_assert_eq!(p.text.matches(DEFAULT_MASK_MARKER).count(), 1);
            prop_assert!(!p.gold.contains(char::is_whitespace));
            prop_assert_eq!(surfaces(&p.filled(DEFAULT_MASK_MARKER)), surfaces(&sentences[&p.probe_id]));
        }
    }

    #[test]
    fn construction_ignores_triple_order(seed in any::<u64>(), rot in 0usize..60) {
        let triples = synth::triples(60, seed);
        let options = ProbeOptions::new(MaskMode::Template, DatasetTag::Quasimodo);
        let mut vocab = vocab_for(&triples);
        let a = build_probes(&triples, &options, &mut vocab).unwrap();
        let mut shuffled = triples.clone();
        shuffled.rotate_left(rot);
        shuffled.reverse();
        let b = build_probes(&shuffled, &options, &mut vocab).unwrap();
        let key = |set: &csk_probe::probe_builder::ProbeSet| {
            let mut p: Vec<String> = set.probes.iter().map(|p| serde_json::to_string(p).unwrap()).collect();
            let mut s: Vec<String> = set.skips.iter().map(|s| format!("{}{}", s.probe_id, s.reason)).collect();
            p.sort();
            s.sort();
            (p, s)
        };
        prop_assert_eq!(key(&a), key(&b));
        prop_assert_eq!(build_probes(&triples, &options, &mut vocab).unwrap(), a);
    }
}

mod common;

use std::collections::HashSet;

use csk_probe::Document;
use csk_probe::readability::{
    BucketConfig, BucketSampler, ReadabilityReport, bucket_by_fre, compute_fre, filter_by_fre, flesch_reading_ease,
};
use proptest::prelude::*;

fn corpus(seed: u64, n: usize) -> Vec<Document> {
    common::random_corpus(&mut common::rng(seed), n, 40)
}

#[test]
fn the_cat_sat() {
    let r = compute_fre(&Document::new("c", "The cat sat.").unwrap());
    assert_eq!((r.n_sentences, r.n_words, r.n_syllables), (1, 3, 3));
    assert!((r.fre.unwrap() - 119.19).abs() < 0.005);
    assert_eq!(r.fre_clamped, Some(100.0));
}

#[test]
fn empty_document_is_unreadable() {
    let r = compute_fre(&Document::new("e", " ... ").unwrap());
    assert_eq!((r.n_sentences, r.n_words, r.n_syllables), (0, 0, 0));
    assert!(r.fre.is_none() && r.fre_clamped.is_none() && !r.is_readable());
}

#[test]
fn non_finite_threshold_is_rejected() {
    assert!(filter_by_fre(Vec::new(), f64::NAN).is_err());
}

#[test]
fn bucket_widths_must_divide_the_range() {
    assert!(BucketConfig::new(10.0, 5, 0).is_ok());
    assert!(BucketConfig::new(30.0, 5, 0).is_err());
    assert!(BucketConfig::new(0.0, 5, 0).is_err());
    let c = BucketConfig::new(25.0, 1, 0).unwrap();
    assert_eq!(c.bucket_of(-40.0), 0);
    assert_eq!(c.bucket_of(25.0), 1);
    assert_eq!(c.bucket_of(100.0), 3);
    assert_eq!(c.bucket_of(180.0), 3);
}

proptest! {
    #[test]
    fn fre_decreases_in_syllables(s in 1usize..50, w in 1usize..500, y in 0usize..2000) {
        let y = y.max(w);
        prop_assert!(flesch_reading_ease(s, w, y + 1).unwrap() < flesch_reading_ease(s, w, y).unwrap());
    }

    #[test]
    fn fre_decreases_in_sentence_length(s in 1usize..50, w in 1usize..500, y in 0usize..2000, m in 2usize..6) {
        let y = y.max(w);
        // Scaling words and syllables together keeps syllables per word fixed.
        let a = flesch_reading_ease(s, w, y).unwrap();
        prop_assert!(flesch_reading_ease(s, w * m, y * m).unwrap() < a);
        prop_assert!(flesch_reading_ease(s + 1, w, y).unwrap() > a);
    }

    #[test]
    fn reports_are_consistent(seed in any::<u64>()) {
        for d in corpus(seed, 5) {
            let r = compute_fre(&d);
            if r.n_words > 0 {
                prop_assert!(r.n_syllables >= r.n_words);
                prop_assert!(r.n_sentences >= 1);
                let fre = r.fre.unwrap();
                prop_assert_eq!(r.fre_clamped, Some(fre.clamp(0.0, 100.0)));
            } else {
                prop_assert_eq!(ReadabilityReport::from_counts(&d.id, 0, 0, 0), r);
            }
        }
    }

    #[test]
    fn filtering_is_monotone(seed in any::<u64>(), t1 in -50.0f64..150.0, dt in 0.0f64..100.0) {
        let docs = corpus(seed, 30);
        let keep = |t: f64| -> HashSet<String> { filter_by_fre(docs.clone(), t).unwrap().map(|d| d.id).collect() };
        let loose = keep(t1);
        let strict = keep(t1 + dt);
        prop_assert!(strict.is_subset(&loose));
    }

    #[test]
    fn buckets_partition_readable_documents(seed in any::<u64>(), sample in 0usize..8, width in prop::sample::select(vec![5.0, 10.0, 20.0, 25.0, 50.0, 100.0])) {
        let docs = corpus(seed, 40);
        let config = BucketConfig::new(width, sample, seed).unwrap();
        let all = bucket_by_fre(docs.clone(), config);
        let full = bucket_by_fre(docs.clone(), BucketConfig::new(width, usize::MAX, seed).unwrap());
        let readable: Vec<&Document> = docs.iter().filter(|d| compute_fre(d).is_readable()).collect();
        prop_assert_eq!(all.unreadable, docs.len() - readable.len());
        let mut members = HashSet::new();
        for (b, f) in all.buckets.iter().zip(&full.buckets) {
            prop_assert_eq!(b.n_docs, f.n_docs);
            prop_assert_eq!(f.sample.len(), f.n_docs);
            prop_assert_eq!(b.n_sampled(), b.n_docs.min(sample));
            for (id, ()) in &f.sample {
                prop_assert!(members.insert(id.clone()), "{} in two buckets", id);
                let fre = compute_fre(docs.iter().find(|d| &d.id == id).unwrap()).fre_clamped.unwrap();
                prop_assert!(config.bucket_of(fre) == ((b.lower / width).round() as usize));
            }
            let ids: HashSet<&String> = f.sample.iter().map(|s| &s.0).collect();
            prop_assert!(b.sample.iter().all(|s| ids.contains(&s.0)));
        }
        prop_assert_eq!(members.len(), readable.len());
    }

    #[test]
    fn bucket_samples_merge_and_ignore_order(seed in any::<u64>(), split in 0usize..40) {
        let docs = corpus(seed, 40);
        let config = BucketConfig::new(10.0, 3, seed ^ 7).unwrap();
        let whole = bucket_by_fre(docs.clone(), config);
        let mut reversed = docs.clone();
        reversed.reverse();
        prop_assert_eq!(&bucket_by_fre(reversed, config), &whole);
        let mut a = BucketSampler::new(config);
        let mut b = BucketSampler::new(config);
        for (i, d) in docs.iter().enumerate() {
            let s = if i < split { &mut a } else { &mut b };
            s.offer(&compute_fre(d), ());
        }
        b.merge(a);
        prop_assert_eq!(b.finish(), whole);
    }
}

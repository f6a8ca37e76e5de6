//! Seeded synthetic corpora with known readability and planted assertions.
//!
//! Words are pseudo-words built from consonant-vowel syllables over the
//! vowels `a i o u`, so their syllable count under the vowel-group heuristic
//! is exactly the number of syllables and they are their own lemmas. Filler
//! words and assertion words use disjoint consonant sets, which rules out
//! accidental matches.

use std::collections::{BTreeSet, HashSet};
use std::fmt::Write as _;

use rand::Rng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;

use crate::csk_density::AssertionPattern;
use crate::probe_builder::Triple;
use crate::readability::{FRE_BASE, FRE_SENTENCE_LENGTH_WEIGHT, FRE_WORD_LENGTH_WEIGHT};
use crate::segmentation::{Document, Segmenter};
use crate::seed;

const VOWELS: &[u8] = b"aiou";
const FILLER_CONSONANTS: &[u8] = b"lnprtvh";
const ASSERTION_CONSONANTS: &[u8] = b"bdgkm";
const COPULAS: [&str; 3] = ["is", "are", "was"];

fn pseudo_word(rng: &mut ChaCha8Rng, consonants: &[u8], syllables: usize) -> String {
    let mut w = String::with_capacity(syllables * 2);
    for _ in 0..syllables {
        w.push(consonants[rng.random_range(0..consonants.len())] as char);
        w.push(VOWELS[rng.random_range(0..VOWELS.len())] as char);
    }
    w
}

/// `n` distinct pseudo-words of `syllables` syllables that lemmatize to
/// themselves and avoid `taken`.
fn word_pool(rng: &mut ChaCha8Rng, consonants: &[u8], syllables: usize, n: usize, taken: &mut HashSet<String>) -> Vec<String> {
    let lem = Segmenter::global().lemmatizer();
    let mut out = Vec::with_capacity(n);
    let mut tries = 0;
    while out.len() < n {
        tries += 1;
        assert!(tries < n * 1000, "pseudo-word space exhausted");
        let w = pseudo_word(rng, consonants, syllables);
        if lem.lemmatize(&w) == w && taken.insert(w.clone()) {
            out.push(w);
        }
    }
    out
}

fn capitalize(w: &str) -> String {
    let mut c = w.chars();
    c.next().map(|f| f.to_ascii_uppercase().to_string() + c.as_str()).unwrap_or_default()
}

/// Parameters of the planted-density corpus; bucket vectors are indexed by
/// FRE bucket of width `100 / n_buckets`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityCorpusConfig {
    pub n_docs: usize,
    pub seed: u64,
    pub words_per_sentence: usize,
    pub min_sentences: usize,
    pub max_sentences: usize,
    /// Relative share of documents per bucket.
    pub bucket_weights: Vec<f64>,
    /// Probability that a sentence carries one planted assertion.
    pub plant_rates: Vec<f64>,
    /// Number of distinct patterns planted in each bucket, used round-robin.
    pub pool_sizes: Vec<usize>,
    pub n_subjects: usize,
    pub n_properties: usize,
}

impl DensityCorpusConfig {
    /// Ten buckets, rates rising from 5% to 27.5% of sentences, and a small
    /// pattern pool in the top bucket.
    pub fn figure_one(n_docs: usize, seed: u64) -> Self {
        DensityCorpusConfig {
            n_docs,
            seed,
            words_per_sentence: 10,
            min_sentences: 3,
            max_sentences: 7,
            bucket_weights: vec![6.0, 8.0, 10.0, 12.0, 14.0, 14.0, 12.0, 10.0, 8.0, 6.0],
            plant_rates: (0..10).map(|b| 0.05 + 0.025 * b as f64).collect(),
            pool_sizes: vec![2000, 2000, 2000, 2000, 2000, 2000, 2000, 2000, 2000, 25],
            n_subjects: 80,
            n_properties: 40,
        }
    }

    pub fn n_buckets(&self) -> usize {
        self.bucket_weights.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PlantedBucket {
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub target_fre: f64,
    pub n_docs: usize,
    pub plant_rate: f64,
    /// Expected matches per word: `plant_rate / words_per_sentence`.
    pub expected_per_word: f64,
    pub pool_size: usize,
}

#[derive(Debug, Clone)]
pub struct DensityCorpus {
    pub docs: Vec<Document>,
    /// Bucket each document was generated for.
    pub target_bucket: Vec<usize>,
    /// Planted assertions per document.
    pub planted: Vec<usize>,
    pub patterns: Vec<AssertionPattern>,
    /// The same assertions as `subject<TAB>property<TAB>support` lines, plus
    /// a few below the default support threshold that are never planted.
    pub assertions_tsv: String,
    pub buckets: Vec<PlantedBucket>,
}

pub fn density_corpus(config: &DensityCorpusConfig) -> DensityCorpus {
    let nb = config.n_buckets();
    assert!(nb > 0 && config.plant_rates.len() == nb && config.pool_sizes.len() == nb);
    assert!(config.words_per_sentence >= 4 && config.min_sentences >= 1 && config.min_sentences <= config.max_sentences);
    let mut rng = seed::rng(config.seed, "synth-density-corpus");
    let mut taken = HashSet::new();
    let fillers: Vec<Vec<String>> = [20, 300, 300, 300]
        .iter()
        .enumerate()
        .map(|(i, &n)| word_pool(&mut rng, FILLER_CONSONANTS, i + 1, n, &mut taken))
        .collect();
    let subjects = word_pool(&mut rng, ASSERTION_CONSONANTS, 2, config.n_subjects, &mut taken);
    let properties = word_pool(&mut rng, ASSERTION_CONSONANTS, 2, config.n_properties, &mut taken);
    let all_pairs = config.n_subjects * config.n_properties;
    assert!(config.pool_sizes.iter().all(|&p| p >= 1 && p <= all_pairs));

    let pair = |i: usize| (&subjects[i / config.n_properties], &properties[i % config.n_properties]);
    let mut planted_ids = BTreeSet::new();
    let pools: Vec<Vec<usize>> = config
        .pool_sizes
        .iter()
        .enumerate()
        .map(|(b, &size)| (0..size).map(|j| (j * 7919 + b * 104_729) % all_pairs).collect::<Vec<_>>())
        .collect();
    for pool in &pools {
        planted_ids.extend(pool.iter().copied());
    }
    let patterns: Vec<AssertionPattern> = planted_ids
        .iter()
        .map(|&i| {
            let (s, p) = pair(i);
            AssertionPattern::new(vec![s.clone()], vec!["be".into(), p.clone()], 10).expect("valid pattern")
        })
        .collect();
    let mut assertions_tsv = String::new();
    for &i in &planted_ids {
        let (s, p) = pair(i);
        writeln!(assertions_tsv, "{s}\tis {p}\t10").unwrap();
    }
    for j in 0..5 {
        let s = &subjects[j % subjects.len()];
        writeln!(assertions_tsv, "{s}\tis rare{}\t{}", "x".repeat(j + 1), j % 5).unwrap();
    }

    let width = 100.0 / nb as f64;
    let weight_sum: f64 = config.bucket_weights.iter().sum();
    let mut counts: Vec<usize> = config
        .bucket_weights
        .iter()
        .map(|w| (w / weight_sum * config.n_docs as f64).floor() as usize)
        .collect();
    let mut short = config.n_docs - counts.iter().sum::<usize>();
    for c in counts.iter_mut().rev() {
        if short == 0 {
            break;
        }
        *c += 1;
        short -= 1;
    }
    let mut order: Vec<usize> = counts.iter().enumerate().flat_map(|(b, &c)| std::iter::repeat_n(b, c)).collect();
    order.shuffle(&mut rng);

    let wps = config.words_per_sentence;
    let mut cursor = vec![0usize; nb];
    let mut docs = Vec::with_capacity(config.n_docs);
    let mut planted = Vec::with_capacity(config.n_docs);
    for (d, &b) in order.iter().enumerate() {
        let target = (b as f64 + 0.5) * width;
        let n_sent = rng.random_range(config.min_sentences..=config.max_sentences);
        let n_words = n_sent * wps;
        let syllables_per_word = (FRE_BASE - FRE_SENTENCE_LENGTH_WEIGHT * wps as f64 - target) / FRE_WORD_LENGTH_WEIGHT;
        let target_syllables = (syllables_per_word * n_words as f64).round() as usize;

        // Each sentence is a list of slots: fixed words or filler placeholders.
        let mut sentences: Vec<Vec<Option<String>>> = Vec::with_capacity(n_sent);
        let mut fixed_syllables = 0;
        let mut n_planted = 0;
        for _ in 0..n_sent {
            let mut slots: Vec<Option<String>> = vec![None; wps];
            if rng.random_bool(config.plant_rates[b]) {
                let pool = &pools[b];
                let (s, p) = pair(pool[cursor[b] % pool.len()]);
                cursor[b] += 1;
                let at = rng.random_range(0..=wps - 3);
                slots[at] = Some(s.clone());
                slots[at + 1] = Some(COPULAS[rng.random_range(0..COPULAS.len())].to_string());
                slots[at + 2] = Some(p.clone());
                fixed_syllables += 2 + 1 + 2;
                n_planted += 1;
            }
            sentences.push(slots);
        }
        let n_fillers: usize = sentences.iter().map(|s| s.iter().filter(|w| w.is_none()).count()).sum();
        let remaining = target_syllables.saturating_sub(fixed_syllables);
        let base = remaining / n_fillers;
        let extra = remaining % n_fillers;
        assert!((1..=4).contains(&base) && (base < 4 || extra == 0), "syllable target out of reach");
        let mut plan: Vec<usize> = (0..n_fillers).map(|i| base + usize::from(i < extra)).collect();
        plan.shuffle(&mut rng);

        let mut text = String::new();
        let mut next = plan.into_iter();
        for slots in sentences {
            let words: Vec<String> = slots
                .into_iter()
                .map(|w| {
                    w.unwrap_or_else(|| {
                        let syl = next.next().expect("one plan entry per filler");
                        let pool = &fillers[syl - 1];
                        pool[rng.random_range(0..pool.len())].clone()
                    })
                })
                .collect();
            if !text.is_empty() {
                text.push(' ');
            }
            text.push_str(&capitalize(&words[0]));
            for w in &words[1..] {
                text.push(' ');
                text.push_str(w);
            }
            text.push('.');
        }
        docs.push(Document::new(format!("doc{d:07}"), text).expect("valid document"));
        planted.push(n_planted);
    }

    let buckets = (0..nb)
        .map(|b| PlantedBucket {
            bucket_lo: b as f64 * width,
            bucket_hi: if b + 1 == nb { 100.0 } else { (b + 1) as f64 * width },
            target_fre: (b as f64 + 0.5) * width,
            n_docs: counts[b],
            plant_rate: config.plant_rates[b],
            expected_per_word: config.plant_rates[b] / wps as f64,
            pool_size: config.pool_sizes[b],
        })
        .collect();
    DensityCorpus {
        docs,
        target_bucket: order,
        planted,
        patterns,
        assertions_tsv,
        buckets,
    }
}

/// Triples with source sentences covering every probe outcome: maskable
/// objects and predicates (sometimes repeated earlier in the sentence),
/// multi-word objects, objects absent from the sentence, and triples
/// without a sentence.
pub fn triples(n: usize, seed: u64) -> Vec<Triple> {
    let mut rng = seed::rng(seed, "synth-triples");
    let mut taken = HashSet::new();
    let words: Vec<String> = [20, 200, 200]
        .iter()
        .enumerate()
        .flat_map(|(i, &n)| word_pool(&mut rng, FILLER_CONSONANTS, i + 1, n, &mut taken))
        .collect();
    let pick = |rng: &mut ChaCha8Rng| words[rng.random_range(0..words.len())].clone();
    (0..n)
        .map(|_| {
            let subject = pick(&mut rng);
            let predicate = pick(&mut rng);
            let kind = rng.random_range(0..10);
            let object = if kind == 0 { format!("{} {}", pick(&mut rng), pick(&mut rng)) } else { pick(&mut rng) };
            let n_rest = rng.random_range(0..4);
            let mut sentence = vec![capitalize(&subject), predicate.clone()];
            if kind == 1 {
                sentence.push(object.clone());
            }
            for _ in 0..n_rest {
                sentence.push(pick(&mut rng));
            }
            if kind != 2 {
                sentence.push(object.clone());
            }
            if rng.random_bool(0.3) {
                sentence.push(pick(&mut rng));
            }
            let punct = [".", "!", "?", "..."][rng.random_range(0..4)];
            let mut text = sentence.join(" ");
            if rng.random_bool(0.2) {
                text = text.replacen(' ', ", ", 1);
            }
            text.push_str(punct);
            let mut t = Triple::new(&subject, &predicate, &object);
            if kind != 3 {
                t = t.with_sentence(&text);
            }
            if rng.random_bool(0.5) {
                t = t.with_score(1.0 + 3.0 * rng.random::<f64>());
            }
            t
        })
        .collect()
}

/// Corpus and sentence-derived triples for an end-to-end scorer run.
/// `frequent` golds appear many times in the corpus, `rare` golds once.
#[derive(Debug, Clone)]
pub struct ProbeCorpus {
    pub docs: Vec<Document>,
    pub frequent: Vec<Triple>,
    pub rare: Vec<Triple>,
}

pub fn probe_corpus(n_frequent: usize, n_rare: usize, seed: u64) -> ProbeCorpus {
    let mut rng = seed::rng(seed, "synth-probe-corpus");
    let mut taken = HashSet::new();
    let fillers = word_pool(&mut rng, FILLER_CONSONANTS, 2, 400, &mut taken);
    let frequent_golds = word_pool(&mut rng, ASSERTION_CONSONANTS, 2, n_frequent, &mut taken);
    let rare_golds = word_pool(&mut rng, ASSERTION_CONSONANTS, 3, n_rare, &mut taken);
    let subjects = word_pool(&mut rng, ASSERTION_CONSONANTS, 1, 10, &mut taken);
    let filler = |rng: &mut ChaCha8Rng| fillers[rng.random_range(0..fillers.len())].clone();

    let mut docs = Vec::new();
    let mut push_doc = |text: String| {
        let id = format!("doc{:06}", docs.len());
        docs.push(Document::new(id, text).expect("valid document"));
    };
    for (i, g) in frequent_golds.iter().enumerate() {
        // Strictly decreasing repetition keeps the frequent golds ranked apart.
        for _ in 0..10 + n_frequent - i {
            let words: Vec<String> = (0..20).map(|_| g.clone()).collect();
            push_doc(format!("{}.", words.join(" ")));
        }
    }
    for g in &rare_golds {
        push_doc(format!("{} {} {}.", capitalize(&filler(&mut rng)), g, filler(&mut rng)));
    }
    for _ in 0..50 {
        let words: Vec<String> = (0..12).map(|_| filler(&mut rng)).collect();
        push_doc(format!("{}.", capitalize(&words.join(" "))));
    }

    let make = |golds: &[String], rng: &mut ChaCha8Rng| -> Vec<Triple> {
        golds
            .iter()
            .map(|g| {
                let s = &subjects[rng.random_range(0..subjects.len())];
                let p = filler(rng);
                let sentence = format!("{} {} {} {}.", capitalize(s), p, filler(rng), g);
                Triple::new(s, &p, g).with_sentence(&sentence)
            })
            .collect()
    };
    let frequent = make(&frequent_golds, &mut rng);
    let rare = make(&rare_golds, &mut rng);
    ProbeCorpus { docs, frequent, rare }
}

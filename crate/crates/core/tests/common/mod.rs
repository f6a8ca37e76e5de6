#![allow(dead_code)]

use std::collections::{BTreeSet, HashMap, HashSet};

use csk_probe::csk_density::{AssertionPattern, MatchEvent};
use csk_probe::segmentation::{self, Document, Segmenter};
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const WORDS: &[&str] = &[
    "the", "a", "cat", "cats", "dog", "dogs", "is", "are", "was", "green", "big", "small", "runs", "run", "running",
    "alligator", "alligators", "eats", "eat", "fish", "bird", "birds", "sings", "flies", "fly", "red", "tree", "trees",
    "children", "child", "went", "go", "goes", "happy", "mice", "mouse", "Dr", "Mr", "U.S.", "3.5",
];
pub const PUNCT: &[&str] = &[".", "!", "?", ",", ";", "...", "\"", "'", "(", ")"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Random prose over a small vocabulary with mixed case and punctuation.
pub fn random_text(rng: &mut ChaCha8Rng, max_tokens: usize) -> String {
    let n = rng.random_range(0..=max_tokens);
    let mut out = String::new();
    for i in 0..n {
        if i > 0 && rng.random_bool(0.9) {
            out.push(if rng.random_bool(0.05) { '\n' } else { ' ' });
        }
        if rng.random_bool(0.15) {
            out.push_str(PUNCT[rng.random_range(0..PUNCT.len())]);
        } else {
            let w = WORDS[rng.random_range(0..WORDS.len())];
            if rng.random_bool(0.2) {
                let mut c = w.chars();
                let first = c.next().unwrap().to_uppercase().collect::<String>();
                out.push_str(&(first + c.as_str()));
            } else {
                out.push_str(w);
            }
        }
    }
    out
}

pub fn random_corpus(rng: &mut ChaCha8Rng, n_docs: usize, max_tokens: usize) -> Vec<Document> {
    (0..n_docs)
        .map(|i| Document::new(format!("d{i:05}"), random_text(rng, max_tokens)).unwrap())
        .collect()
}

/// Zipf-ish draws over `vocab` pseudo-words, for corpora whose vocabulary
/// exceeds the top-k cutoff.
pub fn zipf_corpus(rng: &mut ChaCha8Rng, n_docs: usize, max_tokens: usize, vocab: usize) -> Vec<Document> {
    let words: Vec<String> = (0..vocab).map(|i| format!("w{i}x")).collect();
    (0..n_docs)
        .map(|d| {
            let n = rng.random_range(0..=max_tokens);
            let mut text = String::new();
            for i in 0..n {
                let u: f64 = rng.random();
                let idx = ((vocab as f64).powf(u) as usize).saturating_sub(1).min(vocab - 1);
                text.push_str(&words[idx]);
                text.push_str(if i % 9 == 8 { ". " } else { " " });
            }
            Document::new(format!("z{d:05}"), text).unwrap()
        })
        .collect()
}

#[derive(Debug, Clone, PartialEq)]
pub struct OracleStats {
    pub n_docs: usize,
    pub total_words: u64,
    pub total_sentences: u64,
    pub vocab_size: usize,
    pub distinct_words: u64,
    pub frequent_words: usize,
    pub top_k_cumulative: Option<f64>,
}

/// Whole-corpus, in-memory statistics computed from the token lists alone.
pub fn stats_oracle(docs: &[Document], k: usize, threshold: f64) -> OracleStats {
    let seg = Segmenter::global();
    let mut all: Vec<String> = Vec::new();
    let mut distinct_words = 0u64;
    let mut total_sentences = 0u64;
    for d in docs {
        let tokens = seg.tokenize(&d.text);
        let spans = seg.split_sentences(&tokens);
        total_sentences += spans.iter().filter(|s| s.tokens(&tokens).iter().any(|t| t.is_word)).count() as u64;
        let words: Vec<String> = tokens.iter().filter(|t| t.is_word).map(|t| t.surface.to_lowercase()).collect();
        distinct_words += words.iter().collect::<HashSet<_>>().len() as u64;
        all.extend(words);
    }
    all.sort();
    let mut counts: Vec<u64> = Vec::new();
    for (i, w) in all.iter().enumerate() {
        if i == 0 || all[i - 1] != *w {
            counts.push(0);
        }
        *counts.last_mut().unwrap() += 1;
    }
    let total = all.len() as u64;
    let frequent_words = counts.iter().filter(|&&c| (c as f64 / total as f64) > threshold).count();
    counts.sort_unstable_by(|a, b| b.cmp(a));
    let top: u64 = counts.iter().take(k).sum();
    OracleStats {
        n_docs: docs.len(),
        total_words: total,
        total_sentences,
        vocab_size: counts.len(),
        distinct_words,
        frequent_words,
        top_k_cumulative: (total > 0).then(|| top as f64 / total as f64),
    }
}

/// Random patterns over the lemmas of [`WORDS`].
pub fn random_patterns(rng: &mut ChaCha8Rng, n: usize) -> Vec<AssertionPattern> {
    let seg = Segmenter::global();
    let lemmas: Vec<String> = WORDS
        .iter()
        .filter(|w| w.chars().all(char::is_alphabetic))
        .map(|w| seg.lemmatizer().lemmatize(&w.to_lowercase()))
        .collect::<BTreeSet<_>>()
        .into_iter()
        .collect();
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    let mut tries = 0;
    while out.len() < n && tries < n * 50 {
        tries += 1;
        let phrase = |rng: &mut ChaCha8Rng, max: usize| -> Vec<String> {
            (0..rng.random_range(1..=max)).map(|_| lemmas[rng.random_range(0..lemmas.len())].clone()).collect()
        };
        let s = phrase(rng, 2);
        let p = phrase(rng, 3);
        let p = AssertionPattern::new(s, p, rng.random_range(1..100)).unwrap();
        if seen.insert(p.pattern_id.clone()) {
            out.push(p);
        }
    }
    out
}

fn find_all(hay: &[String], needle: &[String]) -> Vec<usize> {
    if needle.len() > hay.len() {
        return Vec::new();
    }
    (0..=hay.len() - needle.len()).filter(|&i| hay[i..i + needle.len()] == *needle).collect()
}

/// Per pattern, per sentence scan: the subject must end at or before the
/// start of some property occurrence (anywhere, when `loose`).
pub fn density_oracle(docs: &[Document], patterns: &[AssertionPattern], loose: bool) -> Vec<MatchEvent> {
    let seg = Segmenter::global();
    let mut events = Vec::new();
    for d in docs {
        let tokens = seg.tokenize(&d.text);
        for (si, span) in seg.split_sentences(&tokens).iter().enumerate() {
            let lemmas: Vec<String> = span.tokens(&tokens).iter().filter(|t| t.is_word).map(|t| t.lemma.clone()).collect();
            for p in patterns {
                let subj = find_all(&lemmas, &p.subject_lemmas);
                let prop = find_all(&lemmas, &p.property_lemmas);
                let hit = if loose {
                    !subj.is_empty() && !prop.is_empty()
                } else {
                    subj.iter().any(|&s| prop.iter().any(|&q| s + p.subject_lemmas.len() <= q))
                };
                if hit {
                    events.push(MatchEvent {
                        pattern_id: p.pattern_id.clone(),
                        doc_id: d.id.clone(),
                        sentence_index: si,
                    });
                }
            }
        }
    }
    events.sort();
    events
}

/// Word-sentence and word-token totals.
pub fn sentence_word_counts(docs: &[Document]) -> (u64, u64) {
    let seg = Segmenter::global();
    let (mut s, mut w) = (0, 0);
    for d in docs {
        let tokens = seg.tokenize(&d.text);
        let spans = seg.split_sentences(&tokens);
        s += segmentation::count_word_sentences(&tokens, &spans) as u64;
        w += tokens.iter().filter(|t| t.is_word).count() as u64;
    }
    (s, w)
}

pub fn count_by<T: std::hash::Hash + Eq + Clone>(items: impl IntoIterator<Item = T>) -> HashMap<T, usize> {
    let mut m = HashMap::new();
    for i in items {
        *m.entry(i).or_insert(0) += 1;
    }
    m
}

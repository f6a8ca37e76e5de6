//! Corpus-level vocabulary and length statistics.
//!
//! Counting happens in a [`StatsAccumulator`], which is an associative,
//! commutative monoid: shards can be counted independently and merged in any
//! order. The final report is computed once from the merged counts.

use std::collections::{HashMap, HashSet};
use std::io::{self, Write};

use serde::{Deserialize, Serialize};

use crate::segmentation::{self, Document, Segmenter, Token};

pub const DEFAULT_TOP_K: usize = 1000;
/// Frequent words have relative frequency strictly above this (0.01%).
pub const DEFAULT_FREQ_THRESHOLD: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StatsConfig {
    pub k: usize,
    pub freq_threshold: f64,
    /// Count lemmas instead of lowercased surface forms.
    pub by_lemma: bool,
}

impl Default for StatsConfig {
    fn default() -> Self {
        StatsConfig {
            k: DEFAULT_TOP_K,
            freq_threshold: DEFAULT_FREQ_THRESHOLD,
            by_lemma: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusStats {
    pub n_docs: usize,
    pub total_word_tokens: u64,
    pub total_sentences: u64,
    pub avg_doc_len_words: f64,
    pub avg_doc_len_sentences: f64,
    /// Distinct word types over the whole corpus.
    pub vocab_size: usize,
    /// Sum over documents of each document's distinct word types.
    pub distinct_words: u64,
    /// `distinct_words / n_docs`.
    pub avg_doc_vocab: f64,
    /// Types whose relative frequency exceeds the threshold.
    pub frequent_words: usize,
    pub k: usize,
    /// Share of word tokens covered by the `k` most frequent types; `None` for
    /// a corpus without words.
    pub top_k_cumulative: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct StatsAccumulator {
    by_lemma: bool,
    n_docs: usize,
    total_words: u64,
    total_sentences: u64,
    doc_types: u64,
    counts: HashMap<String, u64>,
}

impl StatsAccumulator {
    pub fn new(by_lemma: bool) -> Self {
        StatsAccumulator {
            by_lemma,
            ..Default::default()
        }
    }

    pub fn add_document(&mut self, seg: &Segmenter, doc: &Document) {
        let tokens = seg.tokenize(&doc.text);
        self.add_tokens(seg, &tokens);
    }

    pub fn add_tokens(&mut self, seg: &Segmenter, tokens: &[Token<'_>]) {
        let spans = seg.split_sentences(tokens);
        self.n_docs += 1;
        self.total_sentences += segmentation::count_word_sentences(tokens, &spans) as u64;
        let mut seen: HashSet<&str> = HashSet::new();
        for t in tokens.iter().filter(|t| t.is_word) {
            let key = if self.by_lemma { &t.lemma } else { &t.normalized };
            self.total_words += 1;
            if let Some(c) = self.counts.get_mut(key.as_str()) {
                *c += 1;
            } else {
                self.counts.insert(key.clone(), 1);
            }
            seen.insert(key.as_str());
        }
        self.doc_types += seen.len() as u64;
    }

    pub fn merge(&mut self, other: StatsAccumulator) {
        self.n_docs += other.n_docs;
        self.total_words += other.total_words;
        self.total_sentences += other.total_sentences;
        self.doc_types += other.doc_types;
        for (k, v) in other.counts {
            *self.counts.entry(k).or_insert(0) += v;
        }
    }

    pub fn counts(&self) -> &HashMap<String, u64> {
        &self.counts
    }

    /// Types sorted by count descending, ties lexicographic.
    pub fn frequency_table(&self) -> Vec<(&str, u64)> {
        let mut table: Vec<(&str, u64)> = self.counts.iter().map(|(k, &v)| (k.as_str(), v)).collect();
        table.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        table
    }

    /// Writes the `token<TAB>count` dump in frequency order.
    pub fn write_frequency_dump<W: Write>(&self, mut out: W) -> io::Result<()> {
        for (token, count) in self.frequency_table() {
            writeln!(out, "{token}\t{count}")?;
        }
        Ok(())
    }

    pub fn finish(&self, k: usize, freq_threshold: f64) -> CorpusStats {
        let table = self.frequency_table();
        let total = self.total_words;
        let frequent_words = table
            .iter()
            .take_while(|&&(_, c)| total > 0 && c as f64 / total as f64 > freq_threshold)
            .count();
        let top_sum: u64 = table.iter().take(k).map(|&(_, c)| c).sum();
        let per_doc = |x: u64| if self.n_docs == 0 { 0.0 } else { x as f64 / self.n_docs as f64 };
        CorpusStats {
            n_docs: self.n_docs,
            total_word_tokens: total,
            total_sentences: self.total_sentences,
            avg_doc_len_words: per_doc(total),
            avg_doc_len_sentences: per_doc(self.total_sentences),
            vocab_size: table.len(),
            distinct_words: self.doc_types,
            avg_doc_vocab: per_doc(self.doc_types),
            frequent_words,
            k,
            top_k_cumulative: (total > 0).then(|| top_sum as f64 / total as f64),
        }
    }
}

pub fn compute_stats<I>(docs: I, config: StatsConfig) -> CorpusStats
where
    I: IntoIterator<Item = Document>,
{
    let seg = Segmenter::global();
    let mut acc = StatsAccumulator::new(config.by_lemma);
    for doc in docs {
        acc.add_document(seg, &doc);
    }
    acc.finish(config.k, config.freq_threshold)
}

//! Flesch Reading-Ease scoring, threshold filtering and FRE bucketing.
//!
//! ```text
//! FRE = 206.835 - 1.015 * (words / sentences) - 84.6 * (syllables / words)
//! ```
//!
//! Raw scores are kept unclamped (very short monosyllabic text scores above
//! 100); the clamped value in `[0, 100]` is what bucketing uses.

use std::cmp::Ordering;
use std::collections::BinaryHeap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::seed;
use crate::segmentation::{self, Document, Segmenter, Token};

pub const FRE_BASE: f64 = 206.835;
pub const FRE_SENTENCE_LENGTH_WEIGHT: f64 = 1.015;
pub const FRE_WORD_LENGTH_WEIGHT: f64 = 84.6;

/// Default threshold for the easy-text filter; retention is strict (`fre > min_fre`).
pub const DEFAULT_MIN_FRE: f64 = 80.0;

/// Closed-form FRE, or `None` when there are no words or no sentences.
pub fn flesch_reading_ease(sentences: usize, words: usize, syllables: usize) -> Option<f64> {
    if words == 0 || sentences == 0 {
        return None;
    }
    let words_per_sentence = words as f64 / sentences as f64;
    let syllables_per_word = syllables as f64 / words as f64;
    Some(FRE_BASE - FRE_SENTENCE_LENGTH_WEIGHT * words_per_sentence - FRE_WORD_LENGTH_WEIGHT * syllables_per_word)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReadabilityReport {
    pub doc_id: String,
    pub n_sentences: usize,
    pub n_words: usize,
    pub n_syllables: usize,
    /// `None` marks an unreadable document (no words or no sentences).
    pub fre: Option<f64>,
    pub fre_clamped: Option<f64>,
}

impl ReadabilityReport {
    pub fn from_counts(doc_id: impl Into<String>, n_sentences: usize, n_words: usize, n_syllables: usize) -> Self {
        let fre = flesch_reading_ease(n_sentences, n_words, n_syllables);
        ReadabilityReport {
            doc_id: doc_id.into(),
            n_sentences,
            n_words,
            n_syllables,
            fre,
            fre_clamped: fre.map(|f| f.clamp(0.0, 100.0)),
        }
    }

    pub fn is_readable(&self) -> bool {
        self.fre.is_some()
    }
}

pub fn compute_fre(doc: &Document) -> ReadabilityReport {
    compute_fre_with(Segmenter::global(), doc)
}

pub fn compute_fre_with(seg: &Segmenter, doc: &Document) -> ReadabilityReport {
    let tokens = seg.tokenize(&doc.text);
    report_for_tokens(seg, &doc.id, &tokens)
}

/// Scores an already tokenized document.
pub fn report_for_tokens(seg: &Segmenter, doc_id: &str, tokens: &[Token<'_>]) -> ReadabilityReport {
    let spans = seg.split_sentences(tokens);
    let n_sentences = segmentation::count_word_sentences(tokens, &spans);
    let mut n_words = 0;
    let mut n_syllables = 0;
    for t in tokens.iter().filter(|t| t.is_word) {
        n_words += 1;
        n_syllables += segmentation::count_syllables(t.surface).expect("word tokens contain a letter");
    }
    ReadabilityReport::from_counts(doc_id, n_sentences, n_words, n_syllables)
}

/// Mean of per-document FRE over readable documents, and the FRE of the
/// pooled counts (all sentences, words and syllables summed).
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct FreSummary {
    pub n_readable: usize,
    pub n_unreadable: usize,
    pub mean_fre: Option<f64>,
    pub pooled_fre: Option<f64>,
    #[serde(skip)]
    fre_sum: f64,
    #[serde(skip)]
    sentences: usize,
    #[serde(skip)]
    words: usize,
    #[serde(skip)]
    syllables: usize,
}

impl FreSummary {
    pub fn add(&mut self, report: &ReadabilityReport) {
        match report.fre {
            Some(fre) => {
                self.n_readable += 1;
                self.fre_sum += fre;
                self.sentences += report.n_sentences;
                self.words += report.n_words;
                self.syllables += report.n_syllables;
            }
            None => self.n_unreadable += 1,
        }
        self.refresh();
    }

    pub fn merge(&mut self, other: &FreSummary) {
        self.n_readable += other.n_readable;
        self.n_unreadable += other.n_unreadable;
        self.fre_sum += other.fre_sum;
        self.sentences += other.sentences;
        self.words += other.words;
        self.syllables += other.syllables;
        self.refresh();
    }

    fn refresh(&mut self) {
        self.mean_fre = (self.n_readable > 0).then(|| self.fre_sum / self.n_readable as f64);
        self.pooled_fre = flesch_reading_ease(self.sentences, self.words, self.syllables);
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RetentionCounts {
    pub total: usize,
    pub retained: usize,
    pub unreadable: usize,
}

impl RetentionCounts {
    /// retained / total, counting unreadable documents in the total.
    pub fn ratio(&self) -> Option<f64> {
        (self.total > 0).then(|| self.retained as f64 / self.total as f64)
    }

    pub fn merge(&mut self, other: &RetentionCounts) {
        self.total += other.total;
        self.retained += other.retained;
        self.unreadable += other.unreadable;
    }
}

/// Strict threshold test used by every FRE filter.
pub fn passes_threshold(report: &ReadabilityReport, min_fre: f64) -> bool {
    report.fre.is_some_and(|fre| fre > min_fre)
}

/// Streaming filter over `(item, report)` pairs; yields the items whose FRE is
/// strictly above the threshold and keeps running counts.
#[derive(Debug)]
pub struct FreFilter<I> {
    inner: I,
    min_fre: f64,
    counts: RetentionCounts,
}

impl<I> FreFilter<I> {
    pub fn counts(&self) -> RetentionCounts {
        self.counts
    }
}

impl<I, T> Iterator for FreFilter<I>
where
    I: Iterator<Item = (T, ReadabilityReport)>,
{
    type Item = T;

    fn next(&mut self) -> Option<T> {
        for (item, report) in self.inner.by_ref() {
            self.counts.total += 1;
            if !report.is_readable() {
                self.counts.unreadable += 1;
            } else if passes_threshold(&report, self.min_fre) {
                self.counts.retained += 1;
                return Some(item);
            }
        }
        None
    }
}

fn check_min_fre(min_fre: f64) -> Result<()> {
    if min_fre.is_finite() {
        Ok(())
    } else {
        Err(Error::InvalidArgument(format!("min_fre must be finite, got {min_fre}")))
    }
}

pub fn filter_scored<I, T>(scored: I, min_fre: f64) -> Result<FreFilter<I::IntoIter>>
where
    I: IntoIterator<Item = (T, ReadabilityReport)>,
{
    check_min_fre(min_fre)?;
    Ok(FreFilter {
        inner: scored.into_iter(),
        min_fre,
        counts: RetentionCounts::default(),
    })
}

/// Pairs each document with its report.
pub fn score_documents<I>(docs: I) -> impl Iterator<Item = (Document, ReadabilityReport)>
where
    I: IntoIterator<Item = Document>,
{
    docs.into_iter().map(|d| {
        let report = compute_fre(&d);
        (d, report)
    })
}

pub fn filter_by_fre<I>(docs: I, min_fre: f64) -> Result<FreFilter<impl Iterator<Item = (Document, ReadabilityReport)>>>
where
    I: IntoIterator<Item = Document>,
{
    filter_scored(score_documents(docs), min_fre)
}

/// Equal-width FRE buckets over `[0, 100]` with seeded per-bucket sampling.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BucketConfig {
    pub width: f64,
    pub sample_per_bucket: usize,
    pub seed: u64,
}

impl BucketConfig {
    pub const DEFAULT_WIDTH: f64 = 10.0;
    pub const DEFAULT_SAMPLE: usize = 10_000;

    pub fn new(width: f64, sample_per_bucket: usize, seed: u64) -> Result<Self> {
        let n = (100.0 / width).round();
        if !(width > 0.0 && width.is_finite()) || n < 1.0 || (n * width - 100.0).abs() > 1e-9 {
            return Err(Error::InvalidArgument(format!("bucket width {width} does not divide 100")));
        }
        Ok(BucketConfig {
            width,
            sample_per_bucket,
            seed,
        })
    }

    pub fn n_buckets(&self) -> usize {
        (100.0 / self.width).round() as usize
    }

    pub fn bounds(&self, index: usize) -> (f64, f64) {
        let lower = index as f64 * self.width;
        let upper = if index + 1 == self.n_buckets() { 100.0 } else { (index + 1) as f64 * self.width };
        (lower, upper)
    }

    /// Bucket of an FRE value after clamping; 100 falls into the top bucket.
    pub fn bucket_of(&self, fre: f64) -> usize {
        let clamped = fre.clamp(0.0, 100.0);
        let n = self.n_buckets();
        let mut idx = (clamped / self.width).floor() as usize;
        if idx + 1 < n && (idx + 1) as f64 * self.width <= clamped {
            idx += 1;
        }
        if idx > 0 && idx as f64 * self.width > clamped {
            idx -= 1;
        }
        idx.min(n - 1)
    }

    pub fn buckets(&self) -> Vec<FreBucket> {
        (0..self.n_buckets())
            .map(|i| {
                let (lower, upper) = self.bounds(i);
                FreBucket {
                    lower,
                    upper,
                    sample_size: self.sample_per_bucket,
                }
            })
            .collect()
    }

    fn priority(&self, doc_id: &str) -> u64 {
        seed::derive(seed::derive(self.seed, "fre-bucket-sample"), doc_id)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FreBucket {
    pub lower: f64,
    /// Exclusive, except for the top bucket which includes 100.
    pub upper: f64,
    pub sample_size: usize,
}

struct Candidate<T> {
    priority: u64,
    id: String,
    payload: T,
}

impl<T> Candidate<T> {
    fn key(&self) -> (u64, &str) {
        (self.priority, &self.id)
    }
}

impl<T> PartialEq for Candidate<T> {
    fn eq(&self, other: &Self) -> bool {
        self.key() == other.key()
    }
}

impl<T> Eq for Candidate<T> {}

impl<T> PartialOrd for Candidate<T> {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

impl<T> Ord for Candidate<T> {
    fn cmp(&self, other: &Self) -> Ordering {
        self.key().cmp(&other.key())
    }
}

struct BucketState<T> {
    n_docs: usize,
    // Max-heap holding the `sample_per_bucket` smallest priorities seen so far.
    heap: BinaryHeap<Candidate<T>>,
}

/// Mergeable per-bucket uniform sampler.
///
/// Each document draws a pseudo-random priority from `(seed, doc_id)`; a
/// bucket's sample is the documents with the smallest priorities. The result
/// is a uniform sample without replacement and does not depend on input
/// order or on how the corpus was sharded before [`BucketSampler::merge`].
pub struct BucketSampler<T> {
    config: BucketConfig,
    buckets: Vec<BucketState<T>>,
    unreadable: usize,
}

impl<T> BucketSampler<T> {
    pub fn new(config: BucketConfig) -> Self {
        let buckets = (0..config.n_buckets())
            .map(|_| BucketState {
                n_docs: 0,
                heap: BinaryHeap::new(),
            })
            .collect();
        BucketSampler {
            config,
            buckets,
            unreadable: 0,
        }
    }

    pub fn config(&self) -> &BucketConfig {
        &self.config
    }

    /// Records a document; `payload` is kept only if the document is sampled.
    pub fn offer(&mut self, report: &ReadabilityReport, payload: T) {
        let Some(fre) = report.fre else {
            self.unreadable += 1;
            return;
        };
        let idx = self.config.bucket_of(fre);
        let candidate = Candidate {
            priority: self.config.priority(&report.doc_id),
            id: report.doc_id.clone(),
            payload,
        };
        let k = self.config.sample_per_bucket;
        let state = &mut self.buckets[idx];
        state.n_docs += 1;
        push_bounded(&mut state.heap, candidate, k);
    }

    pub fn merge(&mut self, other: BucketSampler<T>) {
        let k = self.config.sample_per_bucket;
        self.unreadable += other.unreadable;
        for (mine, theirs) in self.buckets.iter_mut().zip(other.buckets) {
            mine.n_docs += theirs.n_docs;
            for c in theirs.heap {
                push_bounded(&mut mine.heap, c, k);
            }
        }
    }

    pub fn finish(self) -> BucketAssignment<T> {
        let config = self.config;
        let buckets = self
            .buckets
            .into_iter()
            .enumerate()
            .map(|(i, state)| {
                let (lower, upper) = config.bounds(i);
                let mut sample: Vec<(String, T)> = state
                    .heap
                    .into_sorted_vec()
                    .into_iter()
                    .map(|c| (c.id, c.payload))
                    .collect();
                sample.sort_by(|a, b| a.0.cmp(&b.0));
                BucketSample {
                    lower,
                    upper,
                    n_docs: state.n_docs,
                    sample,
                }
            })
            .collect();
        BucketAssignment {
            buckets,
            unreadable: self.unreadable,
        }
    }
}

fn push_bounded<T>(heap: &mut BinaryHeap<Candidate<T>>, c: Candidate<T>, k: usize) {
    if k == 0 {
        return;
    }
    if heap.len() < k {
        heap.push(c);
    } else if heap.peek().is_some_and(|top| c < *top) {
        heap.pop();
        heap.push(c);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketSample<T> {
    pub lower: f64,
    pub upper: f64,
    pub n_docs: usize,
    /// Sampled `(doc_id, payload)` pairs, ordered by doc id.
    pub sample: Vec<(String, T)>,
}

impl<T> BucketSample<T> {
    pub fn n_sampled(&self) -> usize {
        self.sample.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BucketAssignment<T> {
    pub buckets: Vec<BucketSample<T>>,
    pub unreadable: usize,
}

/// Assigns every document to its FRE bucket and samples each bucket.
pub fn bucket_by_fre<I>(docs: I, config: BucketConfig) -> BucketAssignment<()>
where
    I: IntoIterator<Item = Document>,
{
    let mut sampler = BucketSampler::new(config);
    for doc in docs {
        sampler.offer(&compute_fre(&doc), ());
    }
    sampler.finish()
}

//! Commonsense assertion spotting and density.
//!
//! An assertion `(subject, property)` matches a sentence when the subject's
//! lemma sequence occurs contiguously in the sentence's lemma stream and the
//! property's lemma sequence occurs contiguously somewhere after the end of
//! that subject occurrence. Each pattern counts at most once per sentence.
//!
//! All subject and property phrases are compiled into one Aho-Corasick
//! automaton over interned lemma ids, so each sentence is scanned once
//! regardless of the number of patterns.

use std::collections::{BTreeSet, HashMap, HashSet};
use std::io::{self, BufRead, Write};

use serde::{Deserialize, Serialize};

use crate::corpus_stats::CorpusStats;
use crate::error::{Error, Result};
use crate::readability::{self, BucketConfig, BucketSampler, ReadabilityReport};
use crate::segmentation::{self, Document, Segmenter, Token};

pub const DEFAULT_MIN_SUPPORT: u64 = 5;
pub const DEFAULT_TOP_PROPERTIES: usize = 4245;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct AssertionPattern {
    /// `subject lemmas|property lemmas`, e.g. `alligator|be green`.
    pub pattern_id: String,
    pub subject_lemmas: Vec<String>,
    pub property_lemmas: Vec<String>,
    pub support: u64,
}

impl AssertionPattern {
    pub fn new(subject_lemmas: Vec<String>, property_lemmas: Vec<String>, support: u64) -> Result<Self> {
        let valid = |v: &[String]| !v.is_empty() && v.iter().all(|l| !l.is_empty() && !l.contains(char::is_whitespace));
        if !valid(&subject_lemmas) || !valid(&property_lemmas) {
            return Err(Error::InvalidArgument("pattern phrases must be non-empty lemma sequences".into()));
        }
        let subject_lemmas: Vec<String> = subject_lemmas.iter().map(|l| l.to_lowercase()).collect();
        let property_lemmas: Vec<String> = property_lemmas.iter().map(|l| l.to_lowercase()).collect();
        Ok(AssertionPattern {
            pattern_id: format!("{}|{}", subject_lemmas.join(" "), property_lemmas.join(" ")),
            subject_lemmas,
            property_lemmas,
            support,
        })
    }

    /// Lemmatizes raw subject and property text.
    pub fn from_text(seg: &Segmenter, subject: &str, property: &str, support: u64) -> Result<Self> {
        AssertionPattern::new(seg.phrase_lemmas(subject), seg.phrase_lemmas(property), support)
    }
}

/// Reads `subject<TAB>property<TAB>support` lines, drops properties with
/// support below `min_support`, and keeps the `top_properties` best supported
/// (ties by pattern id). Lines that lemmatize to the same pattern are merged
/// and their supports summed.
pub fn load_assertions<R: BufRead>(
    reader: R,
    source_name: &str,
    min_support: u64,
    top_properties: usize,
) -> Result<Vec<AssertionPattern>> {
    load_assertions_with(Segmenter::global(), reader, source_name, min_support, top_properties)
}

pub fn load_assertions_with<R: BufRead>(
    seg: &Segmenter,
    reader: R,
    source_name: &str,
    min_support: u64,
    top_properties: usize,
) -> Result<Vec<AssertionPattern>> {
    let mut seen_lines: HashSet<(String, String)> = HashSet::new();
    let mut merged: HashMap<String, AssertionPattern> = HashMap::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        let [subject, property, support] = fields[..] else {
            return Err(Error::malformed(source_name, lineno, format!("expected 3 tab-separated fields, found {}", fields.len())));
        };
        let (subject, property) = (subject.trim(), property.trim());
        let support: u64 = support
            .trim()
            .parse()
            .map_err(|_| Error::malformed(source_name, lineno, format!("support {:?} is not a non-negative integer", support.trim())))?;
        if !seen_lines.insert((subject.to_lowercase(), property.to_lowercase())) {
            return Err(Error::malformed(source_name, lineno, format!("duplicate assertion {subject:?} {property:?}")));
        }
        let pattern = AssertionPattern::from_text(seg, subject, property, support)
            .map_err(|_| Error::malformed(source_name, lineno, "subject and property must contain words"))?;
        merged
            .entry(pattern.pattern_id.clone())
            .and_modify(|p| p.support += support)
            .or_insert(pattern);
    }
    let mut patterns: Vec<AssertionPattern> = merged.into_values().filter(|p| p.support >= min_support).collect();
    patterns.sort_by(|a, b| b.support.cmp(&a.support).then_with(|| a.pattern_id.cmp(&b.pattern_id)));
    patterns.truncate(top_properties);
    if patterns.is_empty() {
        return Err(Error::Empty("assertion set"));
    }
    patterns.sort_by(|a, b| a.pattern_id.cmp(&b.pattern_id));
    Ok(patterns)
}

const NO_SYMBOL: u32 = u32::MAX;
const ROOT: u32 = 0;

/// Aho-Corasick automaton over lemma-id sequences.
#[derive(Debug, Clone)]
struct Automaton {
    goto: HashMap<(u32, u32), u32>,
    fail: Vec<u32>,
    /// `(phrase, length)` of every phrase ending at a state, including those
    /// reached through failure links.
    outputs: Vec<Vec<(u32, u32)>>,
}

impl Automaton {
    fn build(phrases: &[Vec<u32>]) -> Self {
        let mut goto = HashMap::new();
        let mut outputs: Vec<Vec<(u32, u32)>> = vec![Vec::new()];
        let mut children: Vec<Vec<(u32, u32)>> = vec![Vec::new()];
        for (pid, phrase) in phrases.iter().enumerate() {
            let mut state = ROOT;
            for &sym in phrase {
                state = match goto.get(&(state, sym)) {
                    Some(&next) => next,
                    None => {
                        let next = outputs.len() as u32;
                        goto.insert((state, sym), next);
                        children[state as usize].push((sym, next));
                        outputs.push(Vec::new());
                        children.push(Vec::new());
                        next
                    }
                };
            }
            outputs[state as usize].push((pid as u32, phrase.len() as u32));
        }
        let mut fail = vec![ROOT; outputs.len()];
        let mut queue = std::collections::VecDeque::new();
        for &(_, child) in &children[ROOT as usize] {
            queue.push_back(child);
        }
        while let Some(state) = queue.pop_front() {
            for &(sym, child) in &children[state as usize] {
                let mut f = fail[state as usize];
                let target = loop {
                    if let Some(&t) = goto.get(&(f, sym)) {
                        break t;
                    }
                    if f == ROOT {
                        break ROOT;
                    }
                    f = fail[f as usize];
                };
                fail[child as usize] = target;
                let inherited = outputs[target as usize].clone();
                outputs[child as usize].extend(inherited);
                queue.push_back(child);
            }
        }
        Automaton { goto, fail, outputs }
    }

    fn step(&self, mut state: u32, sym: u32) -> u32 {
        if sym == NO_SYMBOL {
            return ROOT;
        }
        loop {
            if let Some(&next) = self.goto.get(&(state, sym)) {
                return next;
            }
            if state == ROOT {
                return ROOT;
            }
            state = self.fail[state as usize];
        }
    }
}

/// Compiled, immutable pattern set; share it across threads by reference.
#[derive(Debug, Clone)]
pub struct PatternSet {
    patterns: Vec<AssertionPattern>,
    lemma_ids: HashMap<String, u32>,
    automaton: Automaton,
    n_phrases: usize,
    /// For each phrase used as a subject: `(pattern index, property phrase)`.
    by_subject: Vec<Vec<(u32, u32)>>,
    loose: bool,
}

/// Matches found in one document, with the counts needed for densities.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct DocumentMatches {
    pub n_sentences: usize,
    pub n_words: usize,
    /// `(sentence_index, pattern_index)` sorted.
    pub matches: Vec<(u32, u32)>,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct MatchEvent {
    pub pattern_id: String,
    pub doc_id: String,
    pub sentence_index: usize,
}

impl PatternSet {
    pub fn new(patterns: Vec<AssertionPattern>) -> Result<Self> {
        if patterns.is_empty() {
            return Err(Error::Empty("pattern set"));
        }
        let mut ids = HashSet::new();
        for p in &patterns {
            if !ids.insert(p.pattern_id.as_str()) {
                return Err(Error::InvalidArgument(format!("duplicate pattern id {:?}", p.pattern_id)));
            }
        }
        let mut lemma_ids: HashMap<String, u32> = HashMap::new();
        let mut phrase_ids: HashMap<Vec<u32>, u32> = HashMap::new();
        let mut phrases: Vec<Vec<u32>> = Vec::new();
        let mut intern_phrase = |lemmas: &[String]| -> u32 {
            let seq: Vec<u32> = lemmas
                .iter()
                .map(|l| {
                    let next = lemma_ids.len() as u32;
                    *lemma_ids.entry(l.clone()).or_insert(next)
                })
                .collect();
            *phrase_ids.entry(seq.clone()).or_insert_with(|| {
                phrases.push(seq);
                (phrases.len() - 1) as u32
            })
        };
        let pairs: Vec<(u32, u32)> = patterns
            .iter()
            .map(|p| (intern_phrase(&p.subject_lemmas), intern_phrase(&p.property_lemmas)))
            .collect();
        let mut by_subject = vec![Vec::new(); phrases.len()];
        for (i, &(s, prop)) in pairs.iter().enumerate() {
            by_subject[s as usize].push((i as u32, prop));
        }
        Ok(PatternSet {
            automaton: Automaton::build(&phrases),
            n_phrases: phrases.len(),
            patterns,
            lemma_ids,
            by_subject,
            loose: false,
        })
    }

    /// Relaxes matching to unordered co-occurrence of subject and property.
    pub fn loose(mut self, loose: bool) -> Self {
        self.loose = loose;
        self
    }

    pub fn is_loose(&self) -> bool {
        self.loose
    }

    pub fn patterns(&self) -> &[AssertionPattern] {
        &self.patterns
    }

    pub fn len(&self) -> usize {
        self.patterns.len()
    }

    pub fn is_empty(&self) -> bool {
        self.patterns.is_empty()
    }

    /// Indices of the patterns matching one sentence's lemma stream, sorted.
    pub fn match_lemmas<S: AsRef<str>>(&self, lemmas: &[S]) -> Vec<u32> {
        let syms: Vec<u32> = lemmas
            .iter()
            .map(|l| self.lemma_ids.get(l.as_ref()).copied().unwrap_or(NO_SYMBOL))
            .collect();
        let mut scratch = Scratch::new(self.n_phrases);
        self.match_symbols(&syms, &mut scratch)
    }

    fn match_symbols(&self, syms: &[u32], scratch: &mut Scratch) -> Vec<u32> {
        scratch.reset();
        let mut state = ROOT;
        for (pos, &sym) in syms.iter().enumerate() {
            state = self.automaton.step(state, sym);
            for &(phrase, len) in &self.automaton.outputs[state as usize] {
                let end = pos as u32 + 1;
                scratch.record(phrase, end - len, end);
            }
        }
        let mut out = Vec::new();
        for &phrase in &scratch.touched {
            let subject_end = scratch.min_end[phrase as usize];
            for &(pattern, prop) in &self.by_subject[phrase as usize] {
                let prop_start = scratch.max_start[prop as usize];
                if prop_start == UNSEEN {
                    continue;
                }
                if self.loose || subject_end <= prop_start {
                    out.push(pattern);
                }
            }
        }
        out.sort_unstable();
        out
    }

    /// Spots all patterns in a document.
    pub fn spot_document(&self, seg: &Segmenter, doc: &Document) -> DocumentMatches {
        let tokens = seg.tokenize(&doc.text);
        self.spot_tokens(seg, &tokens)
    }

    pub fn spot_tokens(&self, seg: &Segmenter, tokens: &[Token<'_>]) -> DocumentMatches {
        let spans = seg.split_sentences(tokens);
        let mut scratch = Scratch::new(self.n_phrases);
        let mut result = DocumentMatches {
            n_sentences: segmentation::count_word_sentences(tokens, &spans),
            ..Default::default()
        };
        let mut syms = Vec::new();
        for (si, span) in spans.iter().enumerate() {
            syms.clear();
            syms.extend(
                span.tokens(tokens)
                    .iter()
                    .filter(|t| t.is_word)
                    .map(|t| self.lemma_ids.get(t.lemma.as_str()).copied().unwrap_or(NO_SYMBOL)),
            );
            result.n_words += syms.len();
            for p in self.match_symbols(&syms, &mut scratch) {
                result.matches.push((si as u32, p));
            }
        }
        result
    }

    pub fn events(&self, doc_id: &str, matches: &DocumentMatches) -> Vec<MatchEvent> {
        matches
            .matches
            .iter()
            .map(|&(si, p)| MatchEvent {
                pattern_id: self.patterns[p as usize].pattern_id.clone(),
                doc_id: doc_id.to_string(),
                sentence_index: si as usize,
            })
            .collect()
    }
}

const UNSEEN: u32 = u32::MAX;

struct Scratch {
    min_end: Vec<u32>,
    max_start: Vec<u32>,
    touched: Vec<u32>,
}

impl Scratch {
    fn new(n: usize) -> Self {
        Scratch {
            min_end: vec![UNSEEN; n],
            max_start: vec![UNSEEN; n],
            touched: Vec::new(),
        }
    }

    fn reset(&mut self) {
        for &p in &self.touched {
            self.min_end[p as usize] = UNSEEN;
            self.max_start[p as usize] = UNSEEN;
        }
        self.touched.clear();
    }

    fn record(&mut self, phrase: u32, start: u32, end: u32) {
        let i = phrase as usize;
        if self.min_end[i] == UNSEEN {
            self.touched.push(phrase);
            self.min_end[i] = end;
            self.max_start[i] = start;
        } else {
            self.min_end[i] = self.min_end[i].min(end);
            self.max_start[i] = self.max_start[i].max(start);
        }
    }
}

/// Lazily spots every document of a stream, yielding events in document and
/// sentence order.
pub fn spot<'p, I>(docs: I, patterns: &'p PatternSet) -> impl Iterator<Item = MatchEvent> + 'p
where
    I: IntoIterator<Item = Document>,
    I::IntoIter: 'p,
{
    let seg = Segmenter::global();
    docs.into_iter().flat_map(move |doc| {
        let m = patterns.spot_document(seg, &doc);
        patterns.events(&doc.id, &m)
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub total_matches: u64,
    pub distinct_patterns_matched: usize,
    pub n_sentences: u64,
    pub n_words: u64,
    /// `None` when there are no sentences.
    pub per_sentence: Option<f64>,
    /// `None` when there are no words.
    pub per_word: Option<f64>,
}

impl DensityReport {
    pub fn from_counts(total_matches: u64, distinct_patterns_matched: usize, n_sentences: u64, n_words: u64) -> Self {
        let ratio = |d: u64| (d > 0).then(|| total_matches as f64 / d as f64);
        DensityReport {
            total_matches,
            distinct_patterns_matched,
            n_sentences,
            n_words,
            per_sentence: ratio(n_sentences),
            per_word: ratio(n_words),
        }
    }
}

/// Density of a match set relative to the corpus it came from.
pub fn density(matches: &[MatchEvent], stats: &CorpusStats) -> DensityReport {
    let distinct: HashSet<&str> = matches.iter().map(|m| m.pattern_id.as_str()).collect();
    DensityReport::from_counts(matches.len() as u64, distinct.len(), stats.total_sentences, stats.total_word_tokens)
}

/// Mergeable match counters.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DensityAccumulator {
    pub total_matches: u64,
    pub n_sentences: u64,
    pub n_words: u64,
    pub matched: BTreeSet<u32>,
}

impl DensityAccumulator {
    pub fn add(&mut self, m: &DocumentMatches) {
        self.total_matches += m.matches.len() as u64;
        self.n_sentences += m.n_sentences as u64;
        self.n_words += m.n_words as u64;
        self.matched.extend(m.matches.iter().map(|&(_, p)| p));
    }

    pub fn merge(&mut self, other: DensityAccumulator) {
        self.total_matches += other.total_matches;
        self.n_sentences += other.n_sentences;
        self.n_words += other.n_words;
        self.matched.extend(other.matched);
    }

    pub fn report(&self) -> DensityReport {
        DensityReport::from_counts(self.total_matches, self.matched.len(), self.n_sentences, self.n_words)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BucketDensity {
    pub bucket_lo: f64,
    pub bucket_hi: f64,
    pub n_docs: usize,
    pub n_sampled: usize,
    pub n_words: u64,
    pub total_matches: u64,
    pub distinct_patterns: usize,
    /// All matches per word of the bucket sample; `None` for an empty sample.
    pub per_word_all: Option<f64>,
    /// Distinct patterns matched in the bucket sample per word.
    pub per_word_distinct: Option<f64>,
}

/// Scores and spots documents in one tokenization pass and feeds a bucket
/// sampler; the sampled documents' matches give the per-bucket curves.
pub struct BucketDensitySampler<'p> {
    patterns: &'p PatternSet,
    sampler: BucketSampler<DocumentMatches>,
}

impl<'p> BucketDensitySampler<'p> {
    pub fn new(patterns: &'p PatternSet, config: BucketConfig) -> Self {
        BucketDensitySampler {
            patterns,
            sampler: BucketSampler::new(config),
        }
    }

    pub fn analyze(patterns: &PatternSet, seg: &Segmenter, doc: &Document) -> (ReadabilityReport, DocumentMatches) {
        let tokens = seg.tokenize(&doc.text);
        (readability::report_for_tokens(seg, &doc.id, &tokens), patterns.spot_tokens(seg, &tokens))
    }

    pub fn offer(&mut self, report: &ReadabilityReport, matches: DocumentMatches) {
        self.sampler.offer(report, matches);
    }

    pub fn add_document(&mut self, seg: &Segmenter, doc: &Document) {
        let (report, matches) = Self::analyze(self.patterns, seg, doc);
        self.offer(&report, matches);
    }

    pub fn merge(&mut self, other: BucketDensitySampler<'_>) {
        self.sampler.merge(other.sampler);
    }

    pub fn finish(self) -> Vec<BucketDensity> {
        self.sampler
            .finish()
            .buckets
            .into_iter()
            .map(|b| {
                let mut acc = DensityAccumulator::default();
                for (_, m) in &b.sample {
                    acc.add(m);
                }
                let per_word = |x: f64| (acc.n_words > 0).then(|| x / acc.n_words as f64);
                BucketDensity {
                    bucket_lo: b.lower,
                    bucket_hi: b.upper,
                    n_docs: b.n_docs,
                    n_sampled: b.sample.len(),
                    n_words: acc.n_words,
                    total_matches: acc.total_matches,
                    distinct_patterns: acc.matched.len(),
                    per_word_all: per_word(acc.total_matches as f64),
                    per_word_distinct: per_word(acc.matched.len() as f64),
                }
            })
            .collect()
    }
}

pub fn bucket_density<I>(docs: I, patterns: &PatternSet, config: BucketConfig) -> Vec<BucketDensity>
where
    I: IntoIterator<Item = Document>,
{
    let seg = Segmenter::global();
    let mut sampler = BucketDensitySampler::new(patterns, config);
    for doc in docs {
        sampler.add_document(seg, &doc);
    }
    sampler.finish()
}

pub fn write_match_dump<W: Write>(mut out: W, events: &[MatchEvent]) -> io::Result<()> {
    for e in events {
        writeln!(out, "{}\t{}\t{}", e.pattern_id, e.doc_id, e.sentence_index)?;
    }
    Ok(())
}

fn fmt_opt(x: Option<f64>) -> String {
    x.map_or_else(|| "NA".to_string(), |v| v.to_string())
}

pub fn write_bucket_curve<W: Write>(mut out: W, curve: &[BucketDensity]) -> io::Result<()> {
    writeln!(out, "bucket_lo\tbucket_hi\tper_word_all\tper_word_distinct")?;
    for b in curve {
        writeln!(out, "{}\t{}\t{}\t{}", b.bucket_lo, b.bucket_hi, fmt_opt(b.per_word_all), fmt_opt(b.per_word_distinct))?;
    }
    Ok(())
}

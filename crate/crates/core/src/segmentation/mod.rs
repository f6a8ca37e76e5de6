//! Tokenization, sentence splitting, syllable counting and lemmatization.
//!
//! Everything here is a pure function of its input plus the immutable
//! resources held by a [`Segmenter`] (abbreviation list and lemma exception
//! table). The free functions use a process-wide default segmenter built from
//! the bundled data files.

mod lemma;
mod sentences;
mod syllables;
mod tokenize;

use std::collections::HashSet;
use std::io::BufRead;
use std::sync::LazyLock;

use serde::{Deserialize, Serialize};
use unicode_normalization::UnicodeNormalization;

use crate::error::{Error, Result};

pub use lemma::Lemmatizer;
pub use syllables::count_syllables;
pub use tokenize::reconstruct;

const BUNDLED_ABBREVIATIONS: &str = include_str!("../../data/abbreviations.txt");

/// One corpus unit.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "RawDocument")]
pub struct Document {
    pub id: String,
    pub text: String,
}

#[derive(Deserialize)]
struct RawDocument {
    id: String,
    text: String,
}

impl TryFrom<RawDocument> for Document {
    type Error = Error;

    fn try_from(raw: RawDocument) -> Result<Self> {
        Document::new(raw.id, raw.text)
    }
}

impl Document {
    /// Builds a document, NFC-normalizing the text. The id must be non-empty.
    pub fn new(id: impl Into<String>, text: impl AsRef<str>) -> Result<Self> {
        let id = id.into();
        if id.is_empty() {
            return Err(Error::InvalidArgument("document id must be non-empty".into()));
        }
        let text = text.as_ref();
        let text = if unicode_normalization::is_nfc(text) {
            text.to_string()
        } else {
            text.nfc().collect()
        };
        Ok(Document { id, text })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Token<'a> {
    /// Slice of the tokenized text.
    pub surface: &'a str,
    /// Byte offset of `surface` in the tokenized text.
    pub offset: usize,
    pub normalized: String,
    pub lemma: String,
    /// True iff the surface contains at least one letter.
    pub is_word: bool,
}

impl Token<'_> {
    pub fn end(&self) -> usize {
        self.offset + self.surface.len()
    }
}

/// Half-open token index range `[start, end)` of one sentence.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct SentenceSpan {
    pub start: usize,
    pub end: usize,
}

impl SentenceSpan {
    pub fn len(&self) -> usize {
        self.end - self.start
    }

    pub fn is_empty(&self) -> bool {
        self.start == self.end
    }

    pub fn tokens<'t, 'a>(&self, tokens: &'t [Token<'a>]) -> &'t [Token<'a>] {
        &tokens[self.start..self.end]
    }
}

/// Linguistic resources shared by all analyses.
#[derive(Debug, Clone)]
pub struct Segmenter {
    abbreviations: HashSet<String>,
    lemmatizer: Lemmatizer,
}

static DEFAULT_SEGMENTER: LazyLock<Segmenter> = LazyLock::new(Segmenter::bundled);

impl Default for Segmenter {
    fn default() -> Self {
        Segmenter::bundled()
    }
}

impl Segmenter {
    pub fn new(abbreviations: HashSet<String>, lemmatizer: Lemmatizer) -> Self {
        Segmenter {
            abbreviations,
            lemmatizer,
        }
    }

    /// Segmenter over the abbreviation list and exception table shipped with the crate.
    pub fn bundled() -> Self {
        let abbreviations = parse_abbreviations(BUNDLED_ABBREVIATIONS.as_bytes(), "abbreviations.txt")
            .expect("bundled abbreviation list is well-formed");
        Segmenter::new(abbreviations, Lemmatizer::bundled())
    }

    /// Shared instance of [`Segmenter::bundled`].
    pub fn global() -> &'static Segmenter {
        &DEFAULT_SEGMENTER
    }

    pub fn with_abbreviations(mut self, abbreviations: HashSet<String>) -> Self {
        self.abbreviations = abbreviations;
        self
    }

    pub fn with_lemmatizer(mut self, lemmatizer: Lemmatizer) -> Self {
        self.lemmatizer = lemmatizer;
        self
    }

    pub fn lemmatizer(&self) -> &Lemmatizer {
        &self.lemmatizer
    }

    pub fn is_abbreviation(&self, lowercase: &str) -> bool {
        self.abbreviations.contains(lowercase)
    }

    pub fn tokenize<'a>(&self, text: &'a str) -> Vec<Token<'a>> {
        tokenize::tokenize(text, &self.lemmatizer)
    }

    pub fn split_sentences(&self, tokens: &[Token<'_>]) -> Vec<SentenceSpan> {
        sentences::split(tokens, self)
    }

    pub fn lemmatize(&self, token: &Token<'_>) -> String {
        if token.is_word {
            self.lemmatizer.lemmatize(&token.normalized)
        } else {
            token.normalized.clone()
        }
    }

    /// Lemma sequence of the word tokens of a short phrase.
    pub fn phrase_lemmas(&self, phrase: &str) -> Vec<String> {
        self.tokenize(phrase)
            .into_iter()
            .filter(|t| t.is_word)
            .map(|t| t.lemma)
            .collect()
    }
}

/// Reads an abbreviation list: one entry per line, `#` comments, trailing dot optional.
pub fn parse_abbreviations<R: BufRead>(reader: R, source_name: &str) -> Result<HashSet<String>> {
    let mut set = HashSet::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let entry = line.trim();
        if entry.is_empty() || entry.starts_with('#') {
            continue;
        }
        let entry = entry.trim_end_matches('.').to_lowercase();
        if entry.is_empty() || entry.chars().any(char::is_whitespace) {
            return Err(Error::malformed(source_name, idx + 1, "abbreviation must be a single word"));
        }
        set.insert(entry);
    }
    Ok(set)
}

pub fn tokenize(text: &str) -> Vec<Token<'_>> {
    Segmenter::global().tokenize(text)
}

pub fn split_sentences(tokens: &[Token<'_>]) -> Vec<SentenceSpan> {
    Segmenter::global().split_sentences(tokens)
}

pub fn lemmatize(token: &Token<'_>) -> String {
    Segmenter::global().lemmatize(token)
}

/// Number of sentences that contain at least one word token.
pub fn count_word_sentences(tokens: &[Token<'_>], spans: &[SentenceSpan]) -> usize {
    spans
        .iter()
        .filter(|s| s.tokens(tokens).iter().any(|t| t.is_word))
        .count()
}

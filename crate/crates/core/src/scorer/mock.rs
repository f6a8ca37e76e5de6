use std::collections::HashMap;
use std::sync::Arc;

use super::{DEFAULT_MASK_MARKER, RankedPrediction, ScoreRequest, Scorer, ScorerError};
use crate::segmentation::{Document, Segmenter};

/// Context-free unigram scorer: every prompt gets the `top_k` most frequent
/// model tokens (ties lexicographic), scored by log relative frequency.
///
/// Cloning is cheap; clones share the model.
#[derive(Debug, Clone)]
pub struct MockScorer {
    ranked: Arc<Vec<(String, f64)>>,
    counts: Arc<HashMap<String, u64>>,
    marker: String,
}

impl MockScorer {
    pub fn from_counts(counts: HashMap<String, u64>) -> Result<Self, ScorerError> {
        let counts: HashMap<String, u64> = counts
            .into_iter()
            .filter(|(t, c)| *c > 0 && !t.is_empty())
            .map(|(t, c)| (t.to_lowercase(), c))
            .fold(HashMap::new(), |mut m, (t, c)| {
                *m.entry(t).or_insert(0) += c;
                m
            });
        if counts.is_empty() {
            return Err(ScorerError::EmptyModel);
        }
        let total: u64 = counts.values().sum();
        let mut ranked: Vec<(&str, u64)> = counts.iter().map(|(t, &c)| (t.as_str(), c)).collect();
        ranked.sort_unstable_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        let ranked = ranked
            .into_iter()
            .map(|(t, c)| (t.to_string(), (c as f64 / total as f64).ln()))
            .collect();
        Ok(MockScorer {
            ranked: Arc::new(ranked),
            counts: Arc::new(counts),
            marker: DEFAULT_MASK_MARKER.to_string(),
        })
    }

    /// Builds the model from the lowercased word tokens of a corpus.
    pub fn from_documents<'a, I>(seg: &Segmenter, docs: I) -> Result<Self, ScorerError>
    where
        I: IntoIterator<Item = &'a Document>,
    {
        let mut counts = HashMap::new();
        for doc in docs {
            for t in seg.tokenize(&doc.text).into_iter().filter(|t| t.is_word) {
                *counts.entry(t.normalized).or_insert(0) += 1;
            }
        }
        MockScorer::from_counts(counts)
    }

    pub fn with_mask_marker(mut self, marker: impl Into<String>) -> Self {
        self.marker = marker.into();
        self
    }

    pub fn vocab_size(&self) -> usize {
        self.ranked.len()
    }

    pub fn count(&self, token: &str) -> u64 {
        self.counts.get(&token.to_lowercase()).copied().unwrap_or(0)
    }

    pub fn score(&self, request: &ScoreRequest) -> Result<RankedPrediction, ScorerError> {
        request.validate(&self.marker)?;
        Ok(RankedPrediction {
            probe_id: request.probe_id.clone(),
            candidates: self.ranked.iter().take(request.top_k).cloned().collect(),
        })
    }

    pub fn contains(&self, token: &str) -> bool {
        !token.is_empty() && !token.contains(char::is_whitespace) && self.counts.contains_key(&token.to_lowercase())
    }
}

impl Scorer for MockScorer {
    fn mask_marker(&self) -> &str {
        &self.marker
    }

    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<RankedPrediction>, ScorerError> {
        requests.iter().map(|r| self.score(r)).collect()
    }

    fn vocab_contains(&mut self, token: &str) -> Result<bool, ScorerError> {
        Ok(self.contains(token))
    }
}

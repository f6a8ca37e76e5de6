//! Mask-fill scoring backends.
//!
//! A [`Scorer`] ranks candidate tokens for the mask position of a prompt.
//! [`MockScorer`] is a deterministic, context-free unigram baseline;
//! [`ProtocolScorer`] talks to an external process over the line-delimited
//! JSON protocol in [`protocol`].

mod mock;
pub mod protocol;

use std::collections::HashSet;
use std::io;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use mock::MockScorer;
pub use protocol::{Endpoint, ProtocolScorer, RetryPolicy};

pub const DEFAULT_MASK_MARKER: &str = "[MASK]";

#[derive(Debug, Error)]
pub enum ScorerError {
    #[error("scorer transport: {0}")]
    Transport(#[from] io::Error),

    #[error("scorer timed out after {attempts} attempts with {pending} requests unanswered")]
    Timeout { attempts: u32, pending: usize },

    #[error("protocol error{}: {message}", .id.as_ref().map(|i| format!(" for {i}")).unwrap_or_default())]
    Protocol { id: Option<String>, message: String },

    #[error("scorer error{}: {message}", .id.as_ref().map(|i| format!(" for {i}")).unwrap_or_default())]
    Remote { id: Option<String>, message: String },

    #[error("scorer configuration: {0}")]
    Config(String),

    #[error("invalid request {id}: {message}")]
    InvalidRequest { id: String, message: String },

    #[error("unigram model is empty")]
    EmptyModel,
}

impl ScorerError {
    pub(crate) fn protocol(id: Option<&str>, message: impl Into<String>) -> Self {
        ScorerError::Protocol {
            id: id.map(str::to_string),
            message: message.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ScoreRequest {
    pub probe_id: String,
    pub text: String,
    pub top_k: usize,
}

impl ScoreRequest {
    pub fn new(probe_id: impl Into<String>, text: impl Into<String>, top_k: usize) -> Self {
        ScoreRequest {
            probe_id: probe_id.into(),
            text: text.into(),
            top_k,
        }
    }

    /// Checks that the text carries exactly one `marker` and `top_k >= 1`.
    pub fn validate(&self, marker: &str) -> Result<(), ScorerError> {
        let invalid = |message: String| ScorerError::InvalidRequest {
            id: self.probe_id.clone(),
            message,
        };
        if self.top_k == 0 {
            return Err(invalid("top_k must be at least 1".into()));
        }
        match self.text.matches(marker).count() {
            1 => Ok(()),
            n => Err(invalid(format!("expected exactly one {marker}, found {n}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RankedPrediction {
    pub probe_id: String,
    pub candidates: Vec<(String, f64)>,
}

impl RankedPrediction {
    /// Checks ordering, distinctness and length against the request.
    pub fn validate(&self, request: &ScoreRequest) -> Result<(), ScorerError> {
        let id = Some(self.probe_id.as_str());
        if self.probe_id != request.probe_id {
            return Err(ScorerError::protocol(
                Some(&request.probe_id),
                format!("response carries id {:?}", self.probe_id),
            ));
        }
        if self.candidates.len() > request.top_k {
            return Err(ScorerError::protocol(
                id,
                format!("{} candidates for top_k {}", self.candidates.len(), request.top_k),
            ));
        }
        let mut seen = HashSet::new();
        for (i, (token, score)) in self.candidates.iter().enumerate() {
            if score.is_nan() {
                return Err(ScorerError::protocol(id, format!("candidate {token:?} has a NaN score")));
            }
            if i > 0 && *score > self.candidates[i - 1].1 {
                return Err(ScorerError::protocol(id, "candidate scores are not non-increasing"));
            }
            if !seen.insert(token.as_str()) {
                return Err(ScorerError::protocol(id, format!("duplicate candidate {token:?}")));
            }
        }
        Ok(())
    }

    pub fn tokens(&self) -> impl Iterator<Item = &str> {
        self.candidates.iter().map(|(t, _)| t.as_str())
    }
}

pub trait Scorer {
    fn mask_marker(&self) -> &str;

    /// Scores a batch; the result has one prediction per request, in order.
    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<RankedPrediction>, ScorerError>;

    fn vocab_contains(&mut self, token: &str) -> Result<bool, ScorerError>;

    fn vocab_contains_batch(&mut self, tokens: &[&str]) -> Result<Vec<bool>, ScorerError> {
        tokens.iter().map(|t| self.vocab_contains(t)).collect()
    }
}

impl<S: Scorer + ?Sized> Scorer for Box<S> {
    fn mask_marker(&self) -> &str {
        (**self).mask_marker()
    }

    fn score_batch(&mut self, requests: &[ScoreRequest]) -> Result<Vec<RankedPrediction>, ScorerError> {
        (**self).score_batch(requests)
    }

    fn vocab_contains(&mut self, token: &str) -> Result<bool, ScorerError> {
        (**self).vocab_contains(token)
    }

    fn vocab_contains_batch(&mut self, tokens: &[&str]) -> Result<Vec<bool>, ScorerError> {
        (**self).vocab_contains_batch(tokens)
    }
}

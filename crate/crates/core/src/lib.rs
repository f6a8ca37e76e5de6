//! Readability, corpus statistics, commonsense-assertion density and masked
//! language-model probing for text corpora.

pub mod cli;
pub mod corpus_stats;
pub mod csk_density;
pub mod eval_metrics;
pub mod error;
pub mod probe_builder;
pub mod readability;
pub mod scorer;
pub mod seed;
pub mod segmentation;
pub mod synth;

pub use error::{Error, Result};
pub use segmentation::{Document, Segmenter};

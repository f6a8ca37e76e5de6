use std::io;

use thiserror::Error;

use crate::scorer::ScorerError;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error(transparent)]
    Io(#[from] io::Error),

    /// A line of a text input could not be parsed.
    #[error("{source_name}:{line}: {message}")]
    Malformed {
        source_name: String,
        line: usize,
        message: String,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("not a word token: {0:?}")]
    NotAWord(String),

    #[error("typicality score {0} outside [1, 4)")]
    TypicalityOutOfRange(f64),

    #[error("property {0:?} has no maskable tail")]
    NoMaskableTail(String),

    #[error("{0} is empty")]
    Empty(&'static str),

    #[error("records are not paired: {} only in first, {} only in second (e.g. {:?})",
        .only_first.len(), .only_second.len(),
        .only_first.iter().chain(.only_second.iter()).next())]
    Unpaired {
        only_first: Vec<String>,
        only_second: Vec<String>,
    },

    #[error(transparent)]
    Scorer(#[from] ScorerError),
}

impl Error {
    pub(crate) fn malformed(source_name: &str, line: usize, message: impl Into<String>) -> Self {
        Error::Malformed {
            source_name: source_name.to_string(),
            line,
            message: message.into(),
        }
    }

    /// True for errors caused by bad user input rather than the environment.
    pub fn is_input_error(&self) -> bool {
        !matches!(self, Error::Io(_) | Error::Scorer(ScorerError::Transport(_) | ScorerError::Timeout { .. }))
    }
}

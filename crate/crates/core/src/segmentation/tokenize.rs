use unicode_normalization::char::is_combining_mark;

use super::{Lemmatizer, Token};

fn is_word_char(c: char) -> bool {
    c.is_alphanumeric() || is_combining_mark(c)
}

fn is_apostrophe(c: char) -> bool {
    c == '\'' || c == '\u{2019}'
}

/// Splits on whitespace and punctuation. A word run continues across an
/// apostrophe between two letters and across `.`/`,` between two digits.
/// Every other non-space character is a token of its own.
pub(super) fn tokenize<'a>(text: &'a str, lemmatizer: &Lemmatizer) -> Vec<Token<'a>> {
    let chars: Vec<(usize, char)> = text.char_indices().collect();
    let mut tokens = Vec::new();
    let mut i = 0;
    while i < chars.len() {
        let (start, c) = chars[i];
        if c.is_whitespace() {
            i += 1;
            continue;
        }
        let mut j = i + 1;
        if is_word_char(c) {
            while j < chars.len() {
                let c = chars[j].1;
                if is_word_char(c) {
                    j += 1;
                    continue;
                }
                let prev = chars[j - 1].1;
                let next = chars.get(j + 1).map(|&(_, c)| c);
                let joins = match next {
                    Some(next) if is_apostrophe(c) => prev.is_alphabetic() && next.is_alphabetic(),
                    Some(next) if c == '.' || c == ',' => prev.is_ascii_digit() && next.is_ascii_digit(),
                    _ => false,
                };
                if !joins {
                    break;
                }
                j += 2;
            }
        }
        let end = chars.get(j).map_or(text.len(), |&(off, _)| off);
        tokens.push(make_token(&text[start..end], start, lemmatizer));
        i = j;
    }
    tokens
}

fn make_token<'a>(surface: &'a str, offset: usize, lemmatizer: &Lemmatizer) -> Token<'a> {
    let normalized = surface.to_lowercase();
    let is_word = surface.chars().any(char::is_alphabetic);
    let lemma = if is_word {
        lemmatizer.lemmatize(&normalized)
    } else {
        normalized.clone()
    };
    Token {
        surface,
        offset,
        normalized,
        lemma,
        is_word,
    }
}

/// Rebuilds the tokenized text from its tokens and the material between them.
pub fn reconstruct(text: &str, tokens: &[Token<'_>]) -> String {
    let mut out = String::with_capacity(text.len());
    let mut pos = 0;
    for t in tokens {
        out.push_str(&text[pos..t.offset]);
        out.push_str(t.surface);
        pos = t.end();
    }
    out.push_str(&text[pos..]);
    out
}

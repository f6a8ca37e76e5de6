//! Rule-based noun/verb lemmatizer.
//!
//! Lookup order for a lowercase word: known lemma (returned as is), then the
//! exception table, then one suffix-rule step. Rule steps always shorten the
//! word, and the lookup is repeated on the result until nothing changes, so
//! the output is a fixed point and lemmatization is idempotent.

use std::collections::{HashMap, HashSet};
use std::io::BufRead;

use crate::error::{Error, Result};

const BUNDLED_EXCEPTIONS: &str = include_str!("../../data/lemma_exceptions.tsv");

#[derive(Debug, Clone, Default)]
pub struct Lemmatizer {
    exceptions: HashMap<String, String>,
    lemmas: HashSet<String>,
}

impl Lemmatizer {
    /// Lemmatizer with no exception table: suffix rules only.
    pub fn rules_only() -> Self {
        Lemmatizer::default()
    }

    pub fn bundled() -> Self {
        Lemmatizer::from_tsv(BUNDLED_EXCEPTIONS.as_bytes(), "lemma_exceptions.tsv")
            .expect("bundled exception table is well-formed")
    }

    /// Reads `inflected<TAB>lemma` lines. Blank lines and `#` comments are skipped.
    pub fn from_tsv<R: BufRead>(reader: R, source_name: &str) -> Result<Self> {
        let mut exceptions = HashMap::new();
        for (idx, line) in reader.lines().enumerate() {
            let line = line?;
            if line.trim().is_empty() || line.starts_with('#') {
                continue;
            }
            let mut fields = line.split('\t');
            let (Some(form), Some(lemma), None) = (fields.next(), fields.next(), fields.next()) else {
                return Err(Error::malformed(source_name, idx + 1, "expected inflected<TAB>lemma"));
            };
            let (form, lemma) = (form.trim().to_lowercase(), lemma.trim().to_lowercase());
            if form.is_empty() || lemma.is_empty() {
                return Err(Error::malformed(source_name, idx + 1, "empty field"));
            }
            exceptions.insert(form, lemma);
        }
        Ok(Lemmatizer::from_map(exceptions))
    }

    pub fn from_map(exceptions: HashMap<String, String>) -> Self {
        let lemmas = exceptions.values().cloned().collect();
        Lemmatizer { exceptions, lemmas }
    }

    pub fn exception_count(&self) -> usize {
        self.exceptions.len()
    }

    /// Lemma of an already lowercased word. Unknown forms pass through.
    pub fn lemmatize(&self, word: &str) -> String {
        let mut w: String = word.replace('\u{2019}', "'");
        if let Some(stem) = w.strip_suffix("'s").filter(|s| !s.is_empty()) {
            w = stem.to_string();
        }
        if !w.chars().all(|c| c.is_ascii_lowercase() || c == '\'') {
            return self.exceptions.get(&w).cloned().unwrap_or(w);
        }
        loop {
            if self.lemmas.contains(&w) {
                return w;
            }
            if let Some(lemma) = self.exceptions.get(&w) {
                return lemma.clone();
            }
            match suffix_step(&w) {
                Some(next) => {
                    debug_assert!(next.len() < w.len());
                    w = next;
                }
                None => return w,
            }
        }
    }
}

fn is_vowel(b: u8) -> bool {
    matches!(b, b'a' | b'e' | b'i' | b'o' | b'u')
}

fn has_vowel(s: &str) -> bool {
    s.bytes().any(|b| is_vowel(b) || b == b'y')
}

/// One inflection-stripping step on a lowercase ASCII word, or `None` when
/// no rule applies.
fn suffix_step(w: &str) -> Option<String> {
    let n = w.len();
    if let Some(stem) = w.strip_suffix("ies") {
        return Some(if n >= 5 { format!("{stem}y") } else { w[..n - 1].to_string() });
    }
    if w.ends_with('s') {
        if n < 3 || w.ends_with("ss") || w.ends_with("us") || w.ends_with("is") || w.ends_with("'s") {
            return None;
        }
        for sibilant in ["sses", "shes", "ches", "xes", "zzes"] {
            if w.ends_with(sibilant) && n > sibilant.len() {
                return Some(w[..n - 2].to_string());
            }
        }
        return Some(w[..n - 1].to_string());
    }
    if let Some(stem) = w.strip_suffix("ed") {
        if n < 4 {
            return None;
        }
        if let Some(root) = w.strip_suffix("ied") {
            return Some(if n >= 5 { format!("{root}y") } else { w[..n - 1].to_string() });
        }
        if w.ends_with("eed") {
            return (n >= 6).then(|| w[..n - 1].to_string());
        }
        return has_vowel(stem).then(|| restore_stem(stem));
    }
    if let Some(stem) = w.strip_suffix("ing") {
        if n < 5 || !has_vowel(stem) {
            return None;
        }
        return Some(restore_stem(stem));
    }
    None
}

/// Undoes consonant doubling or restores a dropped final `e` on a stem left
/// by removing `-ed`/`-ing`.
fn restore_stem(stem: &str) -> String {
    let b = stem.as_bytes();
    let n = b.len();
    let last = b[n - 1];
    if n >= 3 && last == b[n - 2] && !is_vowel(last) && !matches!(last, b'l' | b's' | b'z' | b'f') {
        return stem[..n - 1].to_string();
    }
    let needs_e = match last {
        b'v' => true,
        b'c' => true,
        b'z' => n < 2 || b[n - 2] != b'z',
        b'g' => (n >= 2 && b[n - 2] == b'd') || (n >= 5 && stem.ends_with("ag")),
        b's' => n >= 2 && is_vowel(b[n - 2]) && !stem.ends_with("ous") && !stem.ends_with("cus") && !stem.ends_with("ias"),
        b't' => {
            (n >= 5 && b[n - 2] == b'a' && !matches!(b[n - 3], b'e' | b'o'))
                || (n >= 6 && b[n - 2] == b'u' && !is_vowel(b[n - 3]))
        }
        b'l' => n >= 3 && matches!(b[n - 2], b'b' | b'c' | b'd' | b'f' | b'g' | b'k' | b'p' | b't' | b'z'),
        b'r' => stem.ends_with("ir") || stem.ends_with("ur"),
        _ => is_single_closed_syllable(b),
    };
    if needs_e {
        format!("{stem}e")
    } else {
        stem.to_string()
    }
}

/// Consonants, one vowel, one final consonant other than w/x/y ("lik", "smil", "typ").
fn is_single_closed_syllable(b: &[u8]) -> bool {
    let n = b.len();
    if n < 3 {
        return false;
    }
    let last = b[n - 1];
    let vowel = b[n - 2];
    let onset = &b[..n - 2];
    !is_vowel(last)
        && !matches!(last, b'w' | b'x' | b'y')
        && (is_vowel(vowel) || vowel == b'y')
        && onset.iter().all(|&c| !is_vowel(c) && c != b'y')
}

#[cfg(test)]
mod tests {
    use super::*;

    fn rules(w: &str) -> String {
        Lemmatizer::rules_only().lemmatize(w)
    }

    #[test]
    fn regular_rules() {
        assert_eq!(rules("drinks"), "drink");
        assert_eq!(rules("attacked"), "attack");
        assert_eq!(rules("flies"), "fly");
        assert_eq!(rules("ties"), "tie");
        assert_eq!(rules("boxes"), "box");
        assert_eq!(rules("glasses"), "glass");
        assert_eq!(rules("glass"), "glass");
        assert_eq!(rules("bus"), "bus");
        assert_eq!(rules("carried"), "carry");
        assert_eq!(rules("stopped"), "stop");
        assert_eq!(rules("running"), "run");
        assert_eq!(rules("liked"), "like");
        assert_eq!(rules("making"), "make");
        assert_eq!(rules("loved"), "love");
        assert_eq!(rules("danced"), "dance");
        assert_eq!(rules("called"), "call");
        assert_eq!(rules("rained"), "rain");
        assert_eq!(rules("agreed"), "agree");
        assert_eq!(rules("feed"), "feed");
        assert_eq!(rules("sing"), "sing");
        assert_eq!(rules("thing"), "thing");
        assert_eq!(rules("dressings"), "dress");
    }

    #[test]
    fn possessive_and_curly_apostrophe() {
        assert_eq!(rules("dog's"), "dog");
        assert_eq!(rules("dog\u{2019}s"), "dog");
        assert_eq!(rules("don't"), "don't");
    }

    #[test]
    fn exceptions_take_precedence() {
        let lem = Lemmatizer::bundled();
        assert_eq!(lem.lemmatize("geese"), "goose");
        assert_eq!(lem.lemmatize("are"), "be");
        assert_eq!(lem.lemmatize("is"), "be");
        assert_eq!(lem.lemmatize("was"), "be");
        assert_eq!(lem.lemmatize("children"), "child");
        assert_eq!(lem.lemmatize("teeth"), "tooth");
    }

    #[test]
    fn exception_file_errors_carry_line_numbers() {
        let err = Lemmatizer::from_tsv("a\tb\nbroken\n".as_bytes(), "x.tsv").unwrap_err();
        assert_eq!(err.to_string(), "x.tsv:2: expected inflected<TAB>lemma");
    }

    #[test]
    fn non_ascii_passes_through() {
        assert_eq!(rules("cafés"), "cafés");
    }
}

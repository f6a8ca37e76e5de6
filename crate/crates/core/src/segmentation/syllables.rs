use crate::error::{Error, Result};

fn is_vowel(c: char) -> bool {
    matches!(c.to_ascii_lowercase(), 'a' | 'e' | 'i' | 'o' | 'u' | 'y')
}

/// Vowel-group syllable estimate: the number of maximal runs of `aeiouy`,
/// minus one for a terminal silent `e` (an `e` after a non-vowel) when
/// another group exists, never below one. Only ASCII vowels are recognized,
/// so e.g. a word written in CJK counts as one syllable.
pub fn count_syllables(word: &str) -> Result<usize> {
    if !word.chars().any(char::is_alphabetic) {
        return Err(Error::NotAWord(word.to_string()));
    }
    let mut groups = 0;
    let mut in_group = false;
    for c in word.chars() {
        let v = is_vowel(c);
        if v && !in_group {
            groups += 1;
        }
        in_group = v;
    }
    let mut rev = word.chars().rev();
    let silent_e = matches!(rev.next(), Some('e' | 'E')) && rev.next().is_some_and(|c| !is_vowel(c));
    if silent_e && groups > 1 {
        groups -= 1;
    }
    Ok(groups.max(1))
}

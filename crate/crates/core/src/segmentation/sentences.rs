use super::{Segmenter, SentenceSpan, Token};

fn is_terminal(t: &Token<'_>) -> bool {
    matches!(t.surface, "." | "!" | "?" | "\u{2026}")
}

fn is_closing(t: &Token<'_>) -> bool {
    matches!(t.surface, "\"" | "'" | ")" | "]" | "}" | "\u{201d}" | "\u{2019}" | "\u{bb}")
}

fn adjacent(a: &Token<'_>, b: &Token<'_>) -> bool {
    a.end() == b.offset
}

/// Whether the `.` at `i` belongs to an abbreviation or initialism rather than
/// ending a sentence.
fn dot_is_internal(tokens: &[Token<'_>], i: usize, seg: &Segmenter) -> bool {
    // "e.g", "U.S", "example.com": a dot glued to a following word never ends a sentence.
    if let Some(next) = tokens.get(i + 1) {
        if next.is_word && adjacent(&tokens[i], next) {
            return true;
        }
    }
    if i == 0 || !tokens[i - 1].is_word || !adjacent(&tokens[i - 1], &tokens[i]) {
        return false;
    }
    // Walk back over a glued `word . word . word` chain.
    let mut first = i - 1;
    while first >= 2
        && tokens[first - 1].surface == "."
        && tokens[first - 2].is_word
        && adjacent(&tokens[first - 2], &tokens[first - 1])
        && adjacent(&tokens[first - 1], &tokens[first])
    {
        first -= 2;
    }
    let chain: String = tokens[first..i].iter().map(|t| t.normalized.as_str()).collect();
    seg.is_abbreviation(&chain) || seg.is_abbreviation(&tokens[i - 1].normalized)
}

pub(super) fn split(tokens: &[Token<'_>], seg: &Segmenter) -> Vec<SentenceSpan> {
    let mut spans = Vec::new();
    let mut start = 0;
    let mut i = 0;
    while i < tokens.len() {
        let t = &tokens[i];
        if !is_terminal(t) || (t.surface == "." && dot_is_internal(tokens, i, seg)) {
            i += 1;
            continue;
        }
        let mut end = i + 1;
        while end < tokens.len()
            && adjacent(&tokens[end - 1], &tokens[end])
            && (is_terminal(&tokens[end]) || is_closing(&tokens[end]))
        {
            end += 1;
        }
        spans.push(SentenceSpan { start, end });
        start = end;
        i = end;
    }
    if start < tokens.len() {
        spans.push(SentenceSpan {
            start,
            end: tokens.len(),
        });
    }
    spans
}

#[cfg(test)]
mod tests {
    use crate::segmentation::{split_sentences, tokenize};

    fn count(text: &str) -> usize {
        split_sentences(&tokenize(text)).len()
    }

    #[test]
    fn basic_boundaries() {
        assert_eq!(count("A. B!"), 2);
        assert_eq!(count("no punctuation at all"), 1);
        assert_eq!(count(""), 0);
    }

    #[test]
    fn abbreviations_do_not_split() {
        assert_eq!(count("Mr. Smith ran. He fell."), 2);
        assert_eq!(count("Cats, e.g. lions, roar."), 1);
        assert_eq!(count("Visit example.com today."), 1);
    }

    #[test]
    fn trailing_punctuation_is_absorbed() {
        let toks = tokenize("Wow!! \"Stop.\" Then (run.) ok");
        let spans = split_sentences(&toks);
        let texts: Vec<Vec<&str>> = spans
            .iter()
            .map(|s| s.tokens(&toks).iter().map(|t| t.surface).collect())
            .collect();
        assert_eq!(
            texts,
            vec![
                vec!["Wow", "!", "!"],
                vec!["\"", "Stop", ".", "\""],
                vec!["Then", "(", "run", ".", ")"],
                vec!["ok"],
            ]
        );
    }

    #[test]
    fn decimal_points_do_not_split() {
        assert_eq!(count("It costs 3.50 today. Fine."), 2);
    }
}

use csk_probe::segmentation::{self, count_syllables};
use csk_probe::Segmenter;

fn main() {
    let text = "Dr. Smith keeps two cats. They were running across the U.S. in 3.5 days!";
    let seg = Segmenter::global();
    let tokens = seg.tokenize(text);
    for t in &tokens {
        let syl = if t.is_word { count_syllables(t.surface).unwrap_or(0) } else { 0 };
        println!("{:>3}\t{}\t{}\t{}\t{}", t.offset, t.surface, t.normalized, t.lemma, syl);
    }
    assert_eq!(segmentation::reconstruct(text, &tokens), text);
    for (i, span) in seg.split_sentences(&tokens).iter().enumerate() {
        let words: Vec<&str> = span.tokens(&tokens).iter().map(|t| t.surface).collect();
        println!("sentence {i}: {}", words.join(" "));
    }
}

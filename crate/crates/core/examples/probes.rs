use csk_probe::probe_builder::{self, DatasetTag, MaskMode, ProbeOptions, Triple};
use csk_probe::scorer::MockScorer;
use csk_probe::{Document, Segmenter};

fn main() -> csk_probe::Result<()> {
    let triples = vec![
        Triple::new("alligator", "is", "green").with_sentence("The alligator is green.").with_score(3.2),
        Triple::new("cat", "chases", "mice").with_sentence("A cat chases small mice, and mice run."),
        Triple::new("bird", "can", "fly"),
        Triple::new("dog", "likes", "tennis balls").with_sentence("The dog likes tennis balls."),
    ];
    let vocab = Document::new("v", "Alligators are green. Cats chase mice. Birds fly.")?;
    let mut scorer = MockScorer::from_documents(Segmenter::global(), [&vocab])?;
    for mode in [MaskMode::Object, MaskMode::Template] {
        let options = ProbeOptions::new(mode, DatasetTag::Quasimodo);
        let set = probe_builder::build_probes(&triples, &options, &mut scorer)?;
        probe_builder::write_probes_jsonl(std::io::stdout().lock(), &set.probes)?;
        probe_builder::write_skip_report(std::io::stdout().lock(), &set.skips)?;
    }
    Ok(())
}

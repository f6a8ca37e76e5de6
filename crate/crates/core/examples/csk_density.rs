use csk_probe::csk_density::{self, AssertionPattern, PatternSet};
use csk_probe::readability::BucketConfig;
use csk_probe::synth::{self, DensityCorpusConfig};
use csk_probe::{Document, Segmenter};

fn main() -> csk_probe::Result<()> {
    let seg = Segmenter::global();
    let patterns = PatternSet::new(vec![
        AssertionPattern::from_text(seg, "alligator", "be green", 12)?,
        AssertionPattern::from_text(seg, "cat", "chase mice", 8)?,
    ])?;
    let docs = vec![
        Document::new("d1", "Alligators are green. The cats chased mice all night!")?,
        Document::new("d2", "It is green, the alligator.")?,
    ];
    for event in csk_density::spot(docs.clone(), &patterns) {
        println!("{}\t{}\t{}", event.pattern_id, event.doc_id, event.sentence_index);
    }
    let loose = patterns.clone().loose(true);
    println!("loose matches {}", csk_density::spot(docs, &loose).count());

    let corpus = synth::density_corpus(&DensityCorpusConfig::figure_one(3000, 11));
    let planted = PatternSet::new(corpus.patterns)?;
    let curve = csk_density::bucket_density(corpus.docs, &planted, BucketConfig::new(10.0, 200, 11)?);
    csk_density::write_bucket_curve(std::io::stdout().lock(), &curve)?;
    Ok(())
}

use csk_probe::readability::{self, BucketConfig, FreSummary};
use csk_probe::synth::{self, DensityCorpusConfig};
use csk_probe::Document;

fn main() -> csk_probe::Result<()> {
    let docs = vec![
        Document::new("easy", "The cat sat. The dog ran.")?,
        Document::new("hard", "Institutional considerations necessitate comprehensive reorganization.")?,
        Document::new("empty", "...")?,
    ];
    let mut summary = FreSummary::default();
    for doc in &docs {
        let r = readability::compute_fre(doc);
        summary.add(&r);
        println!("{}\t{}\t{}\t{}\t{:?}", r.doc_id, r.n_sentences, r.n_words, r.n_syllables, r.fre);
    }
    println!("mean {:?} pooled {:?}", summary.mean_fre, summary.pooled_fre);

    let mut filter = readability::filter_by_fre(docs, 50.0)?;
    let kept: Vec<String> = filter.by_ref().map(|d| d.id).collect();
    println!("kept {kept:?} ratio {:?}", filter.counts().ratio());

    let corpus = synth::density_corpus(&DensityCorpusConfig::figure_one(2000, 7));
    let assignment = readability::bucket_by_fre(corpus.docs, BucketConfig::new(10.0, 50, 7)?);
    for b in &assignment.buckets {
        println!("[{:>3}, {:>3})\t{}\t{}", b.lower, b.upper, b.n_docs, b.n_sampled());
    }
    Ok(())
}

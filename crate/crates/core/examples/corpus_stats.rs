use csk_probe::corpus_stats::{self, StatsAccumulator, StatsConfig};
use csk_probe::synth::{self, DensityCorpusConfig};
use csk_probe::Segmenter;

fn main() {
    let corpus = synth::density_corpus(&DensityCorpusConfig::figure_one(500, 3));
    let stats = corpus_stats::compute_stats(corpus.docs.clone(), StatsConfig::default());
    println!("{}", serde_json::to_string_pretty(&stats).unwrap());

    let seg = Segmenter::global();
    let (left, right) = corpus.docs.split_at(250);
    let mut a = StatsAccumulator::new(false);
    let mut b = StatsAccumulator::new(false);
    left.iter().for_each(|d| a.add_document(seg, d));
    right.iter().for_each(|d| b.add_document(seg, d));
    a.merge(b);
    assert_eq!(a.finish(stats.k, 1e-4), stats);
    for (word, count) in a.frequency_table().into_iter().take(5) {
        println!("{word}\t{count}");
    }
}

use csk_probe::eval_metrics::{self, GroupBy};
use csk_probe::probe_builder::{self, DatasetTag, MaskMode, ProbeOptions};
use csk_probe::scorer::MockScorer;
use csk_probe::scorer::{ScoreRequest, Scorer};
use csk_probe::{synth, Segmenter};

fn main() -> csk_probe::Result<()> {
    let corpus = synth::probe_corpus(200, 200, 42);
    let mut scorer = MockScorer::from_documents(Segmenter::global(), &corpus.docs)?;
    let options = ProbeOptions::new(MaskMode::Object, DatasetTag::Conceptnet);
    let mut rows = Vec::new();
    for (name, triples) in [("frequent", &corpus.frequent), ("rare", &corpus.rare)] {
        let set = probe_builder::build_probes(triples, &options, &mut scorer)?;
        let requests: Vec<ScoreRequest> =
            set.probes.iter().map(|p| ScoreRequest::new(&p.probe_id, &p.text, 100)).collect();
        let predictions = scorer.score_batch(&requests)?;
        let records = eval_metrics::build_records(&set.probes, &predictions, false)?;
        let agg = eval_metrics::aggregate(&records, GroupBy::All, &[1, 10, 100])?;
        rows.extend(agg.reports.into_iter().map(|r| (name.to_string(), r)));
    }
    eval_metrics::write_report_tsv(std::io::stdout().lock(), &rows)?;
    Ok(())
}

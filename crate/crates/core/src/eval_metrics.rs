//! Ranked-prediction metrics: reciprocal rank, MRR and median RR, Hits@k,
//! precision/recall@k, grouped reports and a paired bootstrap test.
//!
//! Token comparison is case-insensitive exact match. A gold missing from the
//! returned candidates has reciprocal rank 0.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::io::{self, BufRead, Write};
use std::ops::Range;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::probe_builder::{DatasetTag, Probe, TypicalityBand};
use crate::scorer::RankedPrediction;
use crate::seed;

fn same_token(a: &str, b: &str) -> bool {
    a == b || a.to_lowercase() == b.to_lowercase()
}

/// 1-based rank of the first candidate equal to `gold`.
pub fn rank_of(prediction: &RankedPrediction, gold: &str) -> Option<usize> {
    prediction.tokens().position(|t| same_token(t, gold)).map(|i| i + 1)
}

pub fn reciprocal_rank(prediction: &RankedPrediction, gold: &str) -> f64 {
    rank_of(prediction, gold).map_or(0.0, |r| 1.0 / r as f64)
}

/// `(|top-k ∩ golds| / k, |top-k ∩ golds| / |golds|)`. Missing slots in a
/// short candidate list count as wrong.
pub fn precision_recall_at_k<S: AsRef<str>>(prediction: &RankedPrediction, golds: &[S], k: usize) -> Result<(f64, f64)> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be at least 1".into()));
    }
    let golds = normalized_golds(golds)?;
    let hits = intersection_at(&gold_ranks(prediction, &golds), k);
    Ok((hits as f64 / k as f64, hits as f64 / golds.len() as f64))
}

fn normalized_golds<S: AsRef<str>>(golds: &[S]) -> Result<Vec<String>> {
    let mut set: Vec<String> = golds.iter().map(|g| g.as_ref().to_lowercase()).collect();
    set.sort();
    set.dedup();
    if set.is_empty() {
        return Err(Error::Empty("gold set"));
    }
    Ok(set)
}

/// Ranks at which gold tokens appear, ascending.
fn gold_ranks(prediction: &RankedPrediction, golds: &[String]) -> Vec<usize> {
    let set: HashSet<&str> = golds.iter().map(String::as_str).collect();
    let mut seen = HashSet::new();
    prediction
        .tokens()
        .enumerate()
        .filter_map(|(i, t)| {
            let t = t.to_lowercase();
            (set.contains(t.as_str()) && seen.insert(t)).then_some(i + 1)
        })
        .collect()
}

fn intersection_at(ranks: &[usize], k: usize) -> usize {
    ranks.iter().take_while(|&&r| r <= k).count()
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EvalRecord {
    pub probe_id: String,
    /// Lowercased, sorted, distinct.
    pub golds: Vec<String>,
    /// Best rank of any gold, `None` when no gold was returned.
    pub rank_of_gold: Option<usize>,
    /// Ranks of all returned golds, ascending.
    pub gold_ranks: Vec<usize>,
    pub dataset_tag: DatasetTag,
    pub typicality_band: Option<TypicalityBand>,
}

impl EvalRecord {
    pub fn new<S: AsRef<str>>(
        probe_id: impl Into<String>,
        golds: &[S],
        prediction: &RankedPrediction,
        dataset_tag: DatasetTag,
        typicality_band: Option<TypicalityBand>,
    ) -> Result<Self> {
        let golds = normalized_golds(golds)?;
        let gold_ranks = gold_ranks(prediction, &golds);
        Ok(EvalRecord {
            probe_id: probe_id.into(),
            rank_of_gold: gold_ranks.first().copied(),
            gold_ranks,
            golds,
            dataset_tag,
            typicality_band,
        })
    }

    /// A record with a single gold at a known rank.
    pub fn from_rank(probe_id: impl Into<String>, rank: Option<usize>, dataset_tag: DatasetTag) -> Self {
        EvalRecord {
            probe_id: probe_id.into(),
            golds: vec![String::new()],
            rank_of_gold: rank,
            gold_ranks: rank.into_iter().collect(),
            dataset_tag,
            typicality_band: None,
        }
    }

    pub fn reciprocal_rank(&self) -> f64 {
        self.rank_of_gold.map_or(0.0, |r| 1.0 / r as f64)
    }

    pub fn hit_at(&self, k: usize) -> bool {
        self.rank_of_gold.is_some_and(|r| r <= k)
    }

    pub fn precision_at(&self, k: usize) -> f64 {
        intersection_at(&self.gold_ranks, k) as f64 / k as f64
    }

    pub fn recall_at(&self, k: usize) -> f64 {
        intersection_at(&self.gold_ranks, k) as f64 / self.golds.len() as f64
    }
}

/// Pairs probes with predictions by probe id. With `multi_gold`, probes
/// sharing the same text become one query whose gold set is the union of
/// their golds (identified by the smallest member id).
pub fn build_records(probes: &[Probe], predictions: &[RankedPrediction], multi_gold: bool) -> Result<Vec<EvalRecord>> {
    let by_id: HashMap<&str, &RankedPrediction> = predictions.iter().map(|p| (p.probe_id.as_str(), p)).collect();
    let missing: Vec<String> = probes
        .iter()
        .filter(|p| !by_id.contains_key(p.probe_id.as_str()))
        .map(|p| p.probe_id.clone())
        .collect();
    if !missing.is_empty() {
        return Err(Error::Unpaired {
            only_first: missing,
            only_second: Vec::new(),
        });
    }
    if !multi_gold {
        return probes
            .iter()
            .map(|p| EvalRecord::new(&p.probe_id, &[&p.gold], by_id[p.probe_id.as_str()], p.dataset_tag, p.typicality_band))
            .collect();
    }
    let mut groups: BTreeMap<(&str, DatasetTag), Vec<&Probe>> = BTreeMap::new();
    for p in probes {
        groups.entry((p.text.as_str(), p.dataset_tag)).or_default().push(p);
    }
    let mut records: Vec<EvalRecord> = groups
        .into_values()
        .map(|members| {
            let head = members.iter().min_by(|a, b| a.probe_id.cmp(&b.probe_id)).expect("non-empty group");
            let golds: Vec<&str> = members.iter().map(|p| p.gold.as_str()).collect();
            EvalRecord::new(&head.probe_id, &golds, by_id[head.probe_id.as_str()], head.dataset_tag, head.typicality_band)
        })
        .collect::<Result<_>>()?;
    records.sort_by(|a, b| a.probe_id.cmp(&b.probe_id));
    Ok(records)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum GroupBy {
    All,
    DatasetTag,
    TypicalityBand,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MetricsReport {
    pub group: String,
    pub n: usize,
    pub mrr: f64,
    pub median_rr: f64,
    pub hits_at: BTreeMap<usize, f64>,
    pub p_at: BTreeMap<usize, f64>,
    pub r_at: BTreeMap<usize, f64>,
}

pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 { values[n / 2] } else { (values[n / 2 - 1] + values[n / 2]) / 2.0 })
}

/// Metrics over one group of records; `None` for an empty group.
pub fn metrics(group: impl Into<String>, records: &[&EvalRecord], ks: &[usize]) -> Option<MetricsReport> {
    if records.is_empty() {
        return None;
    }
    let n = records.len() as f64;
    let mut rrs: Vec<f64> = records.iter().map(|r| r.reciprocal_rank()).collect();
    let mrr = rrs.iter().sum::<f64>() / n;
    let mean = |f: &dyn Fn(&EvalRecord) -> f64| records.iter().map(|r| f(r)).sum::<f64>() / n;
    let mut hits_at = BTreeMap::new();
    let mut p_at = BTreeMap::new();
    let mut r_at = BTreeMap::new();
    for &k in ks {
        hits_at.insert(k, records.iter().filter(|r| r.hit_at(k)).count() as f64 / n);
        p_at.insert(k, mean(&|r| r.precision_at(k)));
        r_at.insert(k, mean(&|r| r.recall_at(k)));
    }
    Some(MetricsReport {
        group: group.into(),
        n: records.len(),
        mrr,
        median_rr: median(&mut rrs).expect("non-empty"),
        hits_at,
        p_at,
        r_at,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregation {
    pub reports: Vec<MetricsReport>,
    pub warnings: Vec<String>,
}

/// One report per non-empty group, in a fixed group order.
pub fn aggregate(records: &[EvalRecord], group_by: GroupBy, ks: &[usize]) -> Result<Aggregation> {
    if ks.is_empty() || ks.contains(&0) {
        return Err(Error::InvalidArgument("k values must be at least 1".into()));
    }
    let mut ks = ks.to_vec();
    ks.sort_unstable();
    ks.dedup();
    let mut groups: Vec<(String, Vec<&EvalRecord>)> = match group_by {
        GroupBy::All => vec![("all".to_string(), records.iter().collect())],
        GroupBy::DatasetTag => [DatasetTag::Conceptnet, DatasetTag::Cslb, DatasetTag::QuasimodoEval, DatasetTag::Quasimodo]
            .into_iter()
            .map(|t| (t.to_string(), records.iter().filter(|r| r.dataset_tag == t).collect()))
            .collect(),
        GroupBy::TypicalityBand => [TypicalityBand::VeryTypical, TypicalityBand::Typical, TypicalityBand::Plausible]
            .into_iter()
            .map(|b| (b.to_string(), records.iter().filter(|r| r.typicality_band == Some(b)).collect()))
            .collect(),
    };
    let mut warnings = Vec::new();
    if group_by == GroupBy::TypicalityBand {
        let unbanded = records.iter().filter(|r| r.typicality_band.is_none()).count();
        if unbanded > 0 {
            warnings.push(format!("{unbanded} records without a typicality band were not grouped"));
        }
    }
    let mut reports = Vec::new();
    for (name, members) in groups.drain(..) {
        match metrics(&name, &members, &ks) {
            Some(r) => reports.push(r),
            None if group_by == GroupBy::All => warnings.push("no records".to_string()),
            None => warnings.push(format!("group {name} is empty and was omitted")),
        }
    }
    Ok(Aggregation { reports, warnings })
}

/// Paired differences of reciprocal rank, aligned by sorted probe id.
pub fn paired_differences(a: &[EvalRecord], b: &[EvalRecord]) -> Result<Vec<f64>> {
    let index = |records: &[EvalRecord]| -> Result<BTreeMap<String, f64>> {
        let mut m = BTreeMap::new();
        for r in records {
            if m.insert(r.probe_id.clone(), r.reciprocal_rank()).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate probe id {:?}", r.probe_id)));
            }
        }
        Ok(m)
    };
    let (ma, mb) = (index(a)?, index(b)?);
    let only_first: Vec<String> = ma.keys().filter(|k| !mb.contains_key(*k)).cloned().collect();
    let only_second: Vec<String> = mb.keys().filter(|k| !ma.contains_key(*k)).cloned().collect();
    if !only_first.is_empty() || !only_second.is_empty() {
        return Err(Error::Unpaired { only_first, only_second });
    }
    if ma.is_empty() {
        return Err(Error::Empty("record set"));
    }
    Ok(ma.iter().map(|(k, ra)| ra - mb[k]).collect())
}

/// Paired bootstrap over precomputed differences. Resample `i` draws its
/// indices from a generator seeded by `(seed, i)`, so any split of the
/// resample range gives the same total.
#[derive(Debug, Clone)]
pub struct Bootstrap {
    diffs: Vec<f64>,
    observed: f64,
    seed: u64,
}

impl Bootstrap {
    pub fn new(diffs: Vec<f64>, seed: u64) -> Result<Self> {
        if diffs.is_empty() {
            return Err(Error::Empty("record set"));
        }
        let observed = diffs.iter().sum::<f64>() / diffs.len() as f64;
        Ok(Bootstrap {
            diffs,
            observed,
            seed: seed::derive(seed, "paired-bootstrap"),
        })
    }

    pub fn observed_mean(&self) -> f64 {
        self.observed
    }

    /// Resamples in `range` whose mean difference does not share the
    /// observed sign.
    pub fn count_flips(&self, range: Range<u64>) -> u64 {
        let n = self.diffs.len();
        let sign = self.observed.signum();
        range
            .filter(|&i| {
                let mut rng = ChaCha8Rng::seed_from_u64(seed::derive_index(self.seed, i));
                let sum: f64 = (0..n).map(|_| self.diffs[rng.random_range(0..n)]).sum();
                sum * sign <= 0.0
            })
            .count() as u64
    }

    /// Two-sided p-value from a flip count: `min(1, 2 * flips / iterations)`,
    /// and 1 when the observed difference is zero.
    pub fn p_value(&self, flips: u64, iterations: u64) -> f64 {
        if self.observed == 0.0 || iterations == 0 {
            return 1.0;
        }
        (2.0 * flips as f64 / iterations as f64).min(1.0)
    }
}

pub const DEFAULT_ITERATIONS: u64 = 10_000;

pub fn paired_significance(a: &[EvalRecord], b: &[EvalRecord], iterations: u64, seed: u64) -> Result<f64> {
    let boot = Bootstrap::new(paired_differences(a, b)?, seed)?;
    let flips = boot.count_flips(0..iterations);
    Ok(boot.p_value(flips, iterations))
}

pub fn read_predictions_jsonl<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<RankedPrediction>> {
    let mut out = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        out.push(serde_json::from_str(&line).map_err(|e| Error::malformed(source_name, idx + 1, e.to_string()))?);
    }
    Ok(out)
}

pub fn write_predictions_jsonl<W: Write>(mut out: W, predictions: &[RankedPrediction]) -> io::Result<()> {
    for p in predictions {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

/// Table with one row per `(label, group)` and MRR, median RR, Hits@k,
/// P@k, R@k columns.
pub fn write_report_tsv<W: Write>(mut out: W, rows: &[(String, MetricsReport)]) -> io::Result<()> {
    let ks: Vec<usize> = rows.first().map(|(_, r)| r.hits_at.keys().copied().collect()).unwrap_or_default();
    let mut header = vec!["scorer".to_string(), "group".into(), "n".into(), "mrr".into(), "median_rr".into()];
    header.extend(ks.iter().map(|k| format!("hits@{k}")));
    header.extend(ks.iter().map(|k| format!("p@{k}")));
    header.extend(ks.iter().map(|k| format!("r@{k}")));
    writeln!(out, "{}", header.join("\t"))?;
    for (label, r) in rows {
        let mut cells = vec![label.clone(), r.group.clone(), r.n.to_string(), fmt(r.mrr), fmt(r.median_rr)];
        for map in [&r.hits_at, &r.p_at, &r.r_at] {
            cells.extend(ks.iter().map(|k| map.get(k).map_or_else(|| "NA".into(), |v| fmt(*v))));
        }
        writeln!(out, "{}", cells.join("\t"))?;
    }
    Ok(())
}

/// Square matrix of p-values; row and column headers are scorer labels.
pub fn write_significance_tsv<W: Write>(mut out: W, labels: &[String], p: &[Vec<f64>]) -> io::Result<()> {
    writeln!(out, "scorer\t{}", labels.join("\t"))?;
    for (label, row) in labels.iter().zip(p) {
        let cells: Vec<String> = row.iter().map(|v| fmt(*v)).collect();
        writeln!(out, "{label}\t{}", cells.join("\t"))?;
    }
    Ok(())
}

fn fmt(v: f64) -> String {
    format!("{v:.6}")
}

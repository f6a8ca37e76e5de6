//! Masked probes from knowledge triples.
//!
//! Sentence-derived probes replace the last verbatim, token-aligned
//! occurrence of the object (or predicate) with the mask marker. Template
//! probes mask the final word of a feature-norm property ("Mug hold [MASK].").
//! Golds must be single units of the scorer vocabulary; everything that
//! cannot become a probe is reported with a [`SkipReason`].

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::io::{self, BufRead, Write};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::scorer::{DEFAULT_MASK_MARKER, Scorer};
use crate::seed::stable_hash;
use crate::segmentation::Segmenter;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TypicalityBand {
    VeryTypical,
    Typical,
    Plausible,
}

impl TypicalityBand {
    pub fn as_str(self) -> &'static str {
        match self {
            TypicalityBand::VeryTypical => "very_typical",
            TypicalityBand::Typical => "typical",
            TypicalityBand::Plausible => "plausible",
        }
    }
}

impl fmt::Display for TypicalityBand {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// `[1,2)` very typical, `[2,3)` typical, `[3,4)` plausible.
pub fn assign_typicality_band(score: f64) -> Result<TypicalityBand> {
    match score {
        s if (1.0..2.0).contains(&s) => Ok(TypicalityBand::VeryTypical),
        s if (2.0..3.0).contains(&s) => Ok(TypicalityBand::Typical),
        s if (3.0..4.0).contains(&s) => Ok(TypicalityBand::Plausible),
        s => Err(Error::TypicalityOutOfRange(s)),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum DatasetTag {
    Conceptnet,
    Cslb,
    QuasimodoEval,
    Quasimodo,
}

impl DatasetTag {
    pub fn as_str(self) -> &'static str {
        match self {
            DatasetTag::Conceptnet => "conceptnet",
            DatasetTag::Cslb => "cslb",
            DatasetTag::QuasimodoEval => "quasimodo_eval",
            DatasetTag::Quasimodo => "quasimodo",
        }
    }
}

impl fmt::Display for DatasetTag {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for DatasetTag {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "conceptnet" => DatasetTag::Conceptnet,
            "cslb" => DatasetTag::Cslb,
            "quasimodo_eval" => DatasetTag::QuasimodoEval,
            "quasimodo" => DatasetTag::Quasimodo,
            _ => return Err(Error::InvalidArgument(format!("unknown dataset tag {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskedSlot {
    Object,
    Predicate,
}

/// How probes are derived from triples.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum MaskMode {
    Object,
    Predicate,
    /// `subject + predicate + object` with the final word masked.
    Template,
}

impl FromStr for MaskMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Ok(match s {
            "object" => MaskMode::Object,
            "predicate" => MaskMode::Predicate,
            "template" => MaskMode::Template,
            _ => return Err(Error::InvalidArgument(format!("unknown mask mode {s:?}"))),
        })
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Triple {
    pub subject: String,
    pub predicate: String,
    pub object: String,
    pub typicality_score: Option<f64>,
    pub source_sentence: Option<String>,
}

impl Triple {
    pub fn new(subject: &str, predicate: &str, object: &str) -> Self {
        Triple {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
            typicality_score: None,
            source_sentence: None,
        }
    }

    pub fn with_sentence(mut self, sentence: &str) -> Self {
        self.source_sentence = Some(sentence.to_string());
        self
    }

    pub fn with_score(mut self, score: f64) -> Self {
        self.typicality_score = Some(score);
        self
    }
}

/// Reads `subject<TAB>predicate<TAB>object<TAB>score?<TAB>sentence?` lines.
pub fn parse_triples<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Triple>> {
    let mut triples = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        let lineno = idx + 1;
        if line.trim().is_empty() || line.starts_with('#') {
            continue;
        }
        let fields: Vec<&str> = line.split('\t').collect();
        if !(3..=5).contains(&fields.len()) {
            return Err(Error::malformed(source_name, lineno, format!("expected 3 to 5 tab-separated fields, found {}", fields.len())));
        }
        let (subject, predicate, object) = (fields[0].trim(), fields[1].trim(), fields[2].trim());
        if subject.is_empty() || predicate.is_empty() || object.is_empty() {
            return Err(Error::malformed(source_name, lineno, "subject, predicate and object must be non-empty"));
        }
        let typicality_score = match fields.get(3).map(|s| s.trim()).filter(|s| !s.is_empty()) {
            None => None,
            Some(s) => {
                let v: f64 = s
                    .parse()
                    .map_err(|_| Error::malformed(source_name, lineno, format!("score {s:?} is not a number")))?;
                if !(1.0..=4.0).contains(&v) {
                    return Err(Error::malformed(source_name, lineno, format!("score {v} outside [1, 4]")));
                }
                Some(v)
            }
        };
        let source_sentence = fields.get(4).map(|s| s.trim()).filter(|s| !s.is_empty()).map(str::to_string);
        triples.push(Triple {
            subject: subject.to_string(),
            predicate: predicate.to_string(),
            object: object.to_string(),
            typicality_score,
            source_sentence,
        });
    }
    Ok(triples)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Probe {
    pub probe_id: String,
    pub text: String,
    pub gold: String,
    pub masked_slot: MaskedSlot,
    pub dataset_tag: DatasetTag,
    #[serde(default)]
    pub typicality_band: Option<TypicalityBand>,
}

impl Probe {
    /// The text with the mask replaced by the gold token.
    pub fn filled(&self, marker: &str) -> String {
        self.text.replacen(marker, &self.gold, 1)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SkipReason {
    /// The target contains whitespace or is not one unit of the scorer vocabulary.
    MultiToken,
    /// The target does not occur token-aligned in the sentence.
    NotInSentence,
    /// Sentence masking was requested but the triple has no sentence.
    NoSentence,
    /// The sentence already contains the mask marker.
    MarkerInSentence,
    /// Template property with a single word.
    NoMaskableTail,
    /// Score 4.0 lies outside every typicality band.
    TypicalityOutOfRange,
}

impl SkipReason {
    pub fn as_str(self) -> &'static str {
        match self {
            SkipReason::MultiToken => "multi_token",
            SkipReason::NotInSentence => "not_in_sentence",
            SkipReason::NoSentence => "no_sentence",
            SkipReason::MarkerInSentence => "marker_in_sentence",
            SkipReason::NoMaskableTail => "no_maskable_tail",
            SkipReason::TypicalityOutOfRange => "typicality_out_of_range",
        }
    }
}

impl fmt::Display for SkipReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Skip {
    pub probe_id: String,
    pub reason: SkipReason,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProbeOptions {
    pub mode: MaskMode,
    pub dataset: DatasetTag,
    pub marker: String,
}

impl ProbeOptions {
    pub fn new(mode: MaskMode, dataset: DatasetTag) -> Self {
        ProbeOptions {
            mode,
            dataset,
            marker: DEFAULT_MASK_MARKER.to_string(),
        }
    }

    pub fn with_marker(mut self, marker: impl Into<String>) -> Self {
        self.marker = marker.into();
        self
    }
}

/// Content-derived id: the same triple and options always give the same id.
pub fn probe_id(triple: &Triple, options: &ProbeOptions) -> String {
    let mode = match options.mode {
        MaskMode::Object => "object",
        MaskMode::Predicate => "predicate",
        MaskMode::Template => "template",
    };
    let key = [
        triple.subject.as_str(),
        triple.predicate.as_str(),
        triple.object.as_str(),
        triple.source_sentence.as_deref().unwrap_or(""),
        mode,
        options.dataset.as_str(),
    ]
    .join("\u{1f}");
    format!("{:016x}", stable_hash(key.as_bytes()))
}

/// Replaces the last token-aligned verbatim occurrence of `target`.
pub fn mask_last_occurrence(seg: &Segmenter, sentence: &str, target: &str, marker: &str) -> std::result::Result<String, SkipReason> {
    if target.is_empty() {
        return Err(SkipReason::NotInSentence);
    }
    if sentence.contains(marker) {
        return Err(SkipReason::MarkerInSentence);
    }
    let tokens = seg.tokenize(sentence);
    let starts: HashSet<usize> = tokens.iter().map(|t| t.offset).collect();
    let ends: HashSet<usize> = tokens.iter().map(|t| t.end()).collect();
    let hit = sentence
        .char_indices()
        .map(|(i, _)| i)
        .rev()
        .find(|&i| sentence[i..].starts_with(target) && starts.contains(&i) && ends.contains(&(i + target.len())));
    match hit {
        Some(i) => Ok(format!("{}{}{}", &sentence[..i], marker, &sentence[i + target.len()..])),
        None => Err(SkipReason::NotInSentence),
    }
}

fn is_multi_token(s: &str) -> bool {
    s.contains(char::is_whitespace)
}

fn band_of(triple: &Triple) -> std::result::Result<Option<TypicalityBand>, SkipReason> {
    triple
        .typicality_score
        .map(assign_typicality_band)
        .transpose()
        .map_err(|_| SkipReason::TypicalityOutOfRange)
}

fn sentence_probe(seg: &Segmenter, triple: &Triple, options: &ProbeOptions, slot: MaskedSlot) -> std::result::Result<Probe, SkipReason> {
    let target = match slot {
        MaskedSlot::Object => &triple.object,
        MaskedSlot::Predicate => &triple.predicate,
    };
    if is_multi_token(target) {
        return Err(SkipReason::MultiToken);
    }
    let sentence = triple.source_sentence.as_deref().ok_or(SkipReason::NoSentence)?;
    let text = mask_last_occurrence(seg, sentence, target, &options.marker)?;
    Ok(Probe {
        probe_id: probe_id(triple, options),
        text,
        gold: target.clone(),
        masked_slot: slot,
        dataset_tag: options.dataset,
        typicality_band: band_of(triple)?,
    })
}

/// Object-masked probe from the triple's source sentence, before the
/// vocabulary check.
pub fn mask_object_in_sentence(triple: &Triple, options: &ProbeOptions) -> std::result::Result<Probe, SkipReason> {
    sentence_probe(Segmenter::global(), triple, options, MaskedSlot::Object)
}

pub fn mask_predicate_in_sentence(triple: &Triple, options: &ProbeOptions) -> std::result::Result<Probe, SkipReason> {
    sentence_probe(Segmenter::global(), triple, options, MaskedSlot::Predicate)
}

fn capitalize(s: &str) -> String {
    let mut chars = s.chars();
    match chars.next() {
        Some(c) => c.to_uppercase().chain(chars).collect(),
        None => String::new(),
    }
}

/// `(text, gold)` for a template probe: "Mug hold [MASK]." / "tea".
pub fn build_template_probe(subject: &str, property: &str, marker: &str) -> Result<(String, String)> {
    let words: Vec<&str> = property.split_whitespace().collect();
    let Some((gold, head)) = words.split_last().filter(|(_, head)| !head.is_empty()) else {
        return Err(Error::NoMaskableTail(property.to_string()));
    };
    let text = format!("{} {} {}.", capitalize(subject.trim()), head.join(" "), marker);
    Ok((text, gold.to_string()))
}

/// Builds the probe for one triple, without checking the gold against a
/// vocabulary. Pure, so it can run on any number of threads.
pub fn prepare(seg: &Segmenter, triple: &Triple, options: &ProbeOptions) -> std::result::Result<Probe, Skip> {
    let skip = |reason| Skip {
        probe_id: probe_id(triple, options),
        reason,
    };
    match options.mode {
        MaskMode::Object => sentence_probe(seg, triple, options, MaskedSlot::Object).map_err(skip),
        MaskMode::Predicate => sentence_probe(seg, triple, options, MaskedSlot::Predicate).map_err(skip),
        MaskMode::Template => {
            let property = format!("{} {}", triple.predicate, triple.object);
            let (text, gold) =
                build_template_probe(&triple.subject, &property, &options.marker).map_err(|_| skip(SkipReason::NoMaskableTail))?;
            Ok(Probe {
                probe_id: probe_id(triple, options),
                text,
                gold,
                masked_slot: MaskedSlot::Object,
                dataset_tag: options.dataset,
                typicality_band: band_of(triple).map_err(skip)?,
            })
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ProbeSet {
    pub probes: Vec<Probe>,
    pub skips: Vec<Skip>,
}

impl ProbeSet {
    pub fn skip_counts(&self) -> HashMap<SkipReason, usize> {
        let mut counts = HashMap::new();
        for s in &self.skips {
            *counts.entry(s.reason).or_insert(0) += 1;
        }
        counts
    }
}

/// Applies the single-token vocabulary gate to prepared probes, preserving
/// input order. Distinct golds are queried once, in sorted order.
pub fn finalize<S: Scorer + ?Sized>(prepared: Vec<std::result::Result<Probe, Skip>>, scorer: &mut S) -> Result<ProbeSet> {
    let mut golds: Vec<&str> = prepared.iter().filter_map(|p| p.as_ref().ok()).map(|p| p.gold.as_str()).collect();
    golds.sort_unstable();
    golds.dedup();
    let answers = scorer.vocab_contains_batch(&golds)?;
    let in_vocab: HashMap<String, bool> = golds.iter().map(|g| g.to_string()).zip(answers).collect();
    let mut set = ProbeSet::default();
    for p in prepared {
        match p {
            Ok(probe) if in_vocab[&probe.gold] => set.probes.push(probe),
            Ok(probe) => set.skips.push(Skip {
                probe_id: probe.probe_id,
                reason: SkipReason::MultiToken,
            }),
            Err(skip) => set.skips.push(skip),
        }
    }
    Ok(set)
}

pub fn build_probes<S: Scorer + ?Sized>(triples: &[Triple], options: &ProbeOptions, scorer: &mut S) -> Result<ProbeSet> {
    let seg = Segmenter::global();
    finalize(triples.iter().map(|t| prepare(seg, t, options)).collect(), scorer)
}

pub fn write_probes_jsonl<W: Write>(mut out: W, probes: &[Probe]) -> io::Result<()> {
    for p in probes {
        serde_json::to_writer(&mut out, p)?;
        out.write_all(b"\n")?;
    }
    Ok(())
}

pub fn read_probes_jsonl<R: BufRead>(reader: R, source_name: &str) -> Result<Vec<Probe>> {
    let mut probes = Vec::new();
    for (idx, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        probes.push(serde_json::from_str(&line).map_err(|e| Error::malformed(source_name, idx + 1, e.to_string()))?);
    }
    Ok(probes)
}

pub fn write_skip_report<W: Write>(mut out: W, skips: &[Skip]) -> io::Result<()> {
    for s in skips {
        writeln!(out, "{}\t{}", s.probe_id, s.reason)?;
    }
    Ok(())
}

//! The `csk-probe` command line.
//!
//! [`run`] parses arguments and dispatches to the library; the binary is a
//! thin wrapper around it. Corpora are read as JSONL in fixed-size chunks;
//! each chunk is processed on a pool of `--workers` threads and the per-document
//! results are folded in input order, so output is byte-identical for any
//! worker count.

use std::ffi::OsString;
use std::fs::File;
use std::io::{self, BufRead, BufReader, BufWriter, Write};
use std::net::TcpListener;
use std::path::{Path, PathBuf};
use std::time::Duration;

use clap::{Args, Parser, Subcommand, ValueEnum};
use rayon::prelude::*;
use serde::Serialize;

use crate::corpus_stats::{self, StatsAccumulator};
use crate::csk_density::{self, BucketDensitySampler, DensityAccumulator, PatternSet};
use crate::error::{Error, Result};
use crate::eval_metrics::{self, Bootstrap, EvalRecord, GroupBy, MetricsReport};
use crate::probe_builder::{self, DatasetTag, MaskMode, Probe, ProbeOptions};
use crate::readability::{self, BucketConfig, BucketSampler, FreSummary, ReadabilityReport, RetentionCounts};
use crate::scorer::{self, DEFAULT_MASK_MARKER, Endpoint, MockScorer, ProtocolScorer, RetryPolicy, ScoreRequest, Scorer};
use crate::segmentation::{Document, Segmenter};

/// Lines read per chunk; also bounds per-chunk memory.
pub const CHUNK_LINES: usize = 4096;

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum, Serialize)]
pub enum OutputFormat {
    Tsv,
    Json,
}

#[derive(Debug, Parser)]
#[command(name = "csk-probe", version, about = "Readability, commonsense density and masked-LM probing for text corpora")]
pub struct Cli {
    /// Seed for every sampling step; falls back to CSK_PROBE_SEED.
    #[arg(long, global = true, env = "CSK_PROBE_SEED")]
    pub seed: Option<u64>,
    /// Worker threads (default: available parallelism). Never changes output.
    #[arg(long, global = true, value_parser = clap::value_parser!(u64).range(1..))]
    pub workers: Option<u64>,
    #[arg(long, global = true, value_enum, default_value = "tsv")]
    pub format: OutputFormat,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Flesch Reading-Ease scoring, filtering and bucketing.
    Fre {
        #[command(subcommand)]
        action: FreCommand,
    },
    /// Corpus statistics: lengths, vocabulary, frequent words, top-k coverage.
    Stats(StatsArgs),
    /// Commonsense assertion density, overall or per FRE bucket.
    Density(DensityArgs),
    /// Masked probe construction.
    Probes {
        #[command(subcommand)]
        action: ProbesCommand,
    },
    /// Ranked-prediction evaluation.
    Eval {
        #[command(subcommand)]
        action: EvalCommand,
    },
    /// Serve the unigram mock scorer over protocol v1.
    MockScorer(MockScorerArgs),
}

#[derive(Debug, Args)]
pub struct InputArgs {
    /// JSONL corpus with `id` and `text` fields; `-` for stdin.
    #[arg(long = "in", value_name = "PATH")]
    pub input: PathBuf,
    /// Output file (default: stdout).
    #[arg(long)]
    pub out: Option<PathBuf>,
}

#[derive(Debug, Subcommand)]
pub enum FreCommand {
    /// Per-document readability reports.
    Score(InputArgs),
    /// Keep documents with FRE strictly above the threshold.
    Filter {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, default_value_t = readability::DEFAULT_MIN_FRE)]
        min_fre: f64,
    },
    /// Bucket documents by clamped FRE and sample each bucket.
    Bucket {
        #[command(flatten)]
        io: InputArgs,
        #[arg(long, default_value_t = BucketConfig::DEFAULT_WIDTH)]
        width: f64,
        #[arg(long, default_value_t = BucketConfig::DEFAULT_SAMPLE)]
        sample: usize,
        /// Also write `bucket_lo<TAB>doc_id` for every sampled document.
        #[arg(long)]
        sample_out: Option<PathBuf>,
    },
    /// Mean per-document FRE and FRE of pooled counts.
    Summary(InputArgs),
}

#[derive(Debug, Args)]
pub struct StatsArgs {
    #[command(flatten)]
    pub io: InputArgs,
    #[arg(long, default_value_t = corpus_stats::DEFAULT_TOP_K)]
    pub k: usize,
    #[arg(long, default_value_t = corpus_stats::DEFAULT_FREQ_THRESHOLD)]
    pub freq_threshold: f64,
    /// Count lemmas instead of lowercased surface forms.
    #[arg(long)]
    pub lemma: bool,
    /// Write the `token<TAB>count` frequency dump here.
    #[arg(long)]
    pub dump: Option<PathBuf>,
}

#[derive(Debug, Args)]
pub struct DensityArgs {
    #[command(flatten)]
    pub io: InputArgs,
    /// Assertion TSV: `subject<TAB>property<TAB>support`.
    #[arg(long)]
    pub assertions: PathBuf,
    #[arg(long, default_value_t = csk_density::DEFAULT_MIN_SUPPORT)]
    pub min_support: u64,
    #[arg(long, default_value_t = csk_density::DEFAULT_TOP_PROPERTIES)]
    pub top_properties: usize,
    /// Unordered subject/property co-occurrence instead of subject-first.
    #[arg(long)]
    pub loose: bool,
    /// Write `pattern_id<TAB>doc_id<TAB>sentence_index` for every match.
    #[arg(long)]
    pub matches: Option<PathBuf>,
    /// Per-bucket curves over seeded bucket samples.
    #[arg(long)]
    pub by_bucket: bool,
    #[arg(long, default_value_t = BucketConfig::DEFAULT_WIDTH)]
    pub width: f64,
    #[arg(long, default_value_t = BucketConfig::DEFAULT_SAMPLE)]
    pub sample: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum MaskArg {
    Object,
    Predicate,
    Template,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum DatasetArg {
    Conceptnet,
    Cslb,
    QuasimodoEval,
    Quasimodo,
}

impl From<DatasetArg> for DatasetTag {
    fn from(d: DatasetArg) -> Self {
        match d {
            DatasetArg::Conceptnet => DatasetTag::Conceptnet,
            DatasetArg::Cslb => DatasetTag::Cslb,
            DatasetArg::QuasimodoEval => DatasetTag::QuasimodoEval,
            DatasetArg::Quasimodo => DatasetTag::Quasimodo,
        }
    }
}

#[derive(Debug, Args)]
pub struct ScorerArgs {
    /// `tcp:HOST:PORT`, `stdio:COMMAND`, or `mock:CORPUS.jsonl` for the
    /// in-process unigram scorer.
    #[arg(long)]
    pub scorer: Option<String>,
    #[arg(long, default_value = DEFAULT_MASK_MARKER)]
    pub mask_marker: String,
    /// Seconds to wait for each scorer response.
    #[arg(long, default_value_t = 30.0)]
    pub timeout: f64,
    #[arg(long, default_value_t = 3)]
    pub retries: u32,
}

#[derive(Debug, Subcommand)]
pub enum ProbesCommand {
    /// Build probes from `subject<TAB>predicate<TAB>object<TAB>score?<TAB>sentence?`.
    Build {
        #[arg(long)]
        triples: PathBuf,
        #[arg(long, value_enum, default_value = "object")]
        mask: MaskArg,
        #[arg(long, value_enum, default_value = "conceptnet")]
        dataset: DatasetArg,
        #[command(flatten)]
        scorer: ScorerArgs,
        /// Probe JSONL output (default: stdout).
        #[arg(long)]
        out: Option<PathBuf>,
        /// Skip report `probe_id<TAB>reason`.
        #[arg(long)]
        skips: Option<PathBuf>,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum GroupArg {
    None,
    Dataset,
    Typicality,
}

#[derive(Debug, Subcommand)]
pub enum EvalCommand {
    /// MRR, median RR, Hits@k and P/R@k, from a live scorer or prediction dumps.
    Mrr {
        #[arg(long)]
        probes: PathBuf,
        /// Prediction dump JSONL, optionally `LABEL=PATH`; repeatable.
        #[arg(long)]
        predictions: Vec<String>,
        #[command(flatten)]
        scorer: ScorerArgs,
        /// Row label for a live scorer.
        #[arg(long, default_value = "scorer")]
        label: String,
        #[arg(long, value_enum, default_value = "none")]
        group: GroupArg,
        #[arg(long, value_delimiter = ',', default_value = "1,10")]
        k: Vec<usize>,
        /// Candidates requested per probe from a live scorer.
        #[arg(long, default_value_t = 10)]
        top_k: usize,
        #[arg(long, default_value_t = 64)]
        batch: usize,
        /// Merge probes with identical text into one multi-gold query.
        #[arg(long)]
        multi_gold: bool,
        /// Write the live scorer's predictions as JSONL.
        #[arg(long)]
        dump: Option<PathBuf>,
        /// Write the pairwise significance matrix (needs two or more scorers).
        #[arg(long)]
        significance: Option<PathBuf>,
        #[arg(long, default_value_t = eval_metrics::DEFAULT_ITERATIONS)]
        iterations: u64,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Paired bootstrap test between two prediction dumps.
    Significance {
        #[arg(long)]
        probes: PathBuf,
        #[arg(long)]
        a: PathBuf,
        #[arg(long)]
        b: PathBuf,
        #[arg(long, default_value_t = eval_metrics::DEFAULT_ITERATIONS)]
        iterations: u64,
        #[arg(long)]
        multi_gold: bool,
    },
}

#[derive(Debug, Args)]
pub struct MockScorerArgs {
    /// JSONL corpus the unigram model is counted from.
    #[arg(long)]
    pub corpus: PathBuf,
    #[arg(long, default_value = DEFAULT_MASK_MARKER)]
    pub mask_marker: String,
    /// Serve on stdin/stdout.
    #[arg(long, conflicts_with = "tcp")]
    pub stdio: bool,
    /// Listen on `HOST:PORT` (port 0 picks a free port); prints the bound address.
    #[arg(long)]
    pub tcp: Option<String>,
}

/// Settings shared by every command.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunConfig {
    pub seed: Option<u64>,
    pub workers: usize,
    pub format: OutputFormat,
}

impl RunConfig {
    pub fn require_seed(&self) -> Result<u64> {
        self.seed
            .ok_or_else(|| Error::InvalidArgument("this command samples: pass --seed or set CSK_PROBE_SEED".into()))
    }
}

/// Standard streams handed to [`run`].
pub struct Io<'a> {
    pub stdin: &'a mut dyn BufRead,
    pub stdout: &'a mut dyn Write,
    pub stderr: &'a mut dyn Write,
}

/// Parses `args` (including the program name) and runs the command.
/// Returns the process exit code: 0 on success, 2 for bad input or usage,
/// 1 for environment failures.
pub fn run<I, T>(args: I, io: Io<'_>) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = e.exit_code();
            let rendered = e.render().to_string();
            if e.use_stderr() {
                let _ = io.stderr.write_all(rendered.as_bytes());
            } else {
                let _ = io.stdout.write_all(rendered.as_bytes());
            }
            return code;
        }
    };
    let stderr = &mut *io.stderr;
    match execute(cli, io.stdin, io.stdout, stderr) {
        Ok(()) => 0,
        Err(e) => {
            let _ = writeln!(stderr, "error: {e}");
            if e.is_input_error() { 2 } else { 1 }
        }
    }
}

pub fn execute(cli: Cli, stdin: &mut dyn BufRead, stdout: &mut dyn Write, stderr: &mut dyn Write) -> Result<()> {
    let workers = cli
        .workers
        .map(|w| w as usize)
        .unwrap_or_else(|| std::thread::available_parallelism().map_or(1, |n| n.get()));
    let config = RunConfig {
        seed: cli.seed,
        workers,
        format: cli.format,
    };
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(workers)
        .build()
        .map_err(|e| Error::Io(io::Error::other(e)))?;
    let mut ctx = Ctx {
        config,
        pool,
        stdin,
        stdout,
        stderr,
    };
    match cli.command {
        Command::Fre { action } => ctx.fre(action),
        Command::Stats(args) => ctx.stats(args),
        Command::Density(args) => ctx.density(args),
        Command::Probes { action } => ctx.probes(action),
        Command::Eval { action } => ctx.eval(action),
        Command::MockScorer(args) => ctx.mock_scorer(args),
    }
}

struct Ctx<'a> {
    config: RunConfig,
    pool: rayon::ThreadPool,
    stdin: &'a mut dyn BufRead,
    stdout: &'a mut dyn Write,
    stderr: &'a mut dyn Write,
}

fn display_name(path: &Path) -> String {
    if path.as_os_str() == "-" { "<stdin>".into() } else { path.display().to_string() }
}

fn open_file(path: &Path) -> Result<BufReader<File>> {
    File::open(path)
        .map(BufReader::new)
        .map_err(|e| Error::InvalidArgument(format!("cannot open {}: {e}", path.display())))
}

fn create_file(path: &Path) -> Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn fmt_opt(v: Option<f64>) -> String {
    v.map_or_else(|| "NA".into(), |x| x.to_string())
}

fn write_json_line<W: Write + ?Sized, T: Serialize>(out: &mut W, value: &T) -> Result<()> {
    serde_json::to_writer(&mut *out, value).map_err(io::Error::from)?;
    out.write_all(b"\n")?;
    Ok(())
}

/// Parses one JSONL document line.
fn parse_document(source: &str, lineno: usize, line: &str) -> Result<Document> {
    serde_json::from_str(line).map_err(|e| Error::malformed(source, lineno, e.to_string()))
}

impl Ctx<'_> {
    /// Streams a JSONL corpus: for each chunk, `map` runs on the pool for
    /// every document and `fold` receives the results in input order.
    fn for_each_doc<R, M, F>(&mut self, path: &Path, map: M, mut fold: F) -> Result<()>
    where
        R: Send,
        M: Fn(Document) -> R + Sync,
        F: FnMut(R) -> Result<()>,
    {
        let source = display_name(path);
        let mut reader: Box<dyn BufRead> = if path.as_os_str() == "-" {
            Box::new(&mut *self.stdin)
        } else {
            Box::new(open_file(path)?)
        };
        let pool = &self.pool;
        let mut lineno = 0;
        loop {
            let mut chunk: Vec<(usize, String)> = Vec::with_capacity(CHUNK_LINES);
            while chunk.len() < CHUNK_LINES {
                let mut line = String::new();
                if reader.read_line(&mut line)? == 0 {
                    break;
                }
                lineno += 1;
                if !line.trim().is_empty() {
                    chunk.push((lineno, line));
                }
            }
            if chunk.is_empty() {
                return Ok(());
            }
            let results: Vec<Result<R>> = pool.install(|| {
                chunk
                    .into_par_iter()
                    .map(|(n, line)| parse_document(&source, n, &line).map(&map))
                    .collect()
            });
            for r in results {
                fold(r?)?;
            }
        }
    }

    fn pool_install<T: Send>(&self, f: impl FnOnce() -> T + Send) -> T {
        self.pool.install(f)
    }

    fn output<'s>(&'s mut self, path: &Option<PathBuf>) -> Result<Box<dyn Write + 's>> {
        match path {
            Some(p) => Ok(Box::new(create_file(p)?)),
            None => Ok(Box::new(&mut *self.stdout)),
        }
    }

    fn fre(&mut self, action: FreCommand) -> Result<()> {
        let seg = Segmenter::global();
        match action {
            FreCommand::Score(io) => {
                let mut reports = Vec::new();
                self.for_each_doc(&io.input, |d| readability::compute_fre_with(seg, &d), |r| {
                    reports.push(r);
                    Ok(())
                })?;
                let format = self.config.format;
                let mut out = self.output(&io.out)?;
                if format == OutputFormat::Tsv {
                    writeln!(out, "doc_id\tn_sentences\tn_words\tn_syllables\tfre\tfre_clamped")?;
                }
                for r in &reports {
                    match format {
                        OutputFormat::Tsv => writeln!(
                            out,
                            "{}\t{}\t{}\t{}\t{}\t{}",
                            r.doc_id,
                            r.n_sentences,
                            r.n_words,
                            r.n_syllables,
                            fmt_opt(r.fre),
                            fmt_opt(r.fre_clamped)
                        )?,
                        OutputFormat::Json => write_json_line(&mut out, r)?,
                    }
                }
                out.flush()?;
            }
            FreCommand::Filter { io, min_fre } => {
                if !min_fre.is_finite() {
                    return Err(Error::InvalidArgument(format!("min_fre must be finite, got {min_fre}")));
                }
                let mut kept: Vec<Document> = Vec::new();
                let mut counts = RetentionCounts::default();
                let mut out: Box<dyn Write> = match &io.out {
                    Some(p) => Box::new(create_file(p)?),
                    None => Box::new(Vec::new()),
                };
                let to_stdout = io.out.is_none();
                self.for_each_doc(
                    &io.input,
                    |d| {
                        let r = readability::compute_fre_with(seg, &d);
                        (d, r)
                    },
                    |(d, r)| {
                        counts.total += 1;
                        if !r.is_readable() {
                            counts.unreadable += 1;
                        } else if readability::passes_threshold(&r, min_fre) {
                            counts.retained += 1;
                            if to_stdout {
                                kept.push(d);
                            } else {
                                write_json_line(&mut out, &d)?;
                            }
                        }
                        Ok(())
                    },
                )?;
                out.flush()?;
                drop(out);
                for d in &kept {
                    write_json_line(&mut *self.stdout, d)?;
                }
                match self.config.format {
                    OutputFormat::Tsv => writeln!(
                        self.stderr,
                        "retained\t{}\ttotal\t{}\tunreadable\t{}\tratio\t{}",
                        counts.retained,
                        counts.total,
                        counts.unreadable,
                        fmt_opt(counts.ratio())
                    )?,
                    OutputFormat::Json => write_json_line(&mut *self.stderr, &counts)?,
                }
            }
            FreCommand::Bucket {
                io,
                width,
                sample,
                sample_out,
            } => {
                let config = BucketConfig::new(width, sample, self.config.require_seed()?)?;
                let mut sampler: BucketSampler<()> = BucketSampler::new(config);
                self.for_each_doc(&io.input, |d| readability::compute_fre_with(seg, &d), |r| {
                    sampler.offer(&r, ());
                    Ok(())
                })?;
                let assignment = sampler.finish();
                if let Some(path) = sample_out {
                    let mut f = create_file(&path)?;
                    for b in &assignment.buckets {
                        for (id, ()) in &b.sample {
                            writeln!(f, "{}\t{}", b.lower, id)?;
                        }
                    }
                    f.flush()?;
                }
                #[derive(Serialize)]
                struct Row {
                    bucket_lo: f64,
                    bucket_hi: f64,
                    n_docs: usize,
                    n_sampled: usize,
                }
                let rows: Vec<Row> = assignment
                    .buckets
                    .iter()
                    .map(|b| Row {
                        bucket_lo: b.lower,
                        bucket_hi: b.upper,
                        n_docs: b.n_docs,
                        n_sampled: b.n_sampled(),
                    })
                    .collect();
                let format = self.config.format;
                let mut out = self.output(&io.out)?;
                match format {
                    OutputFormat::Tsv => {
                        writeln!(out, "bucket_lo\tbucket_hi\tn_docs\tn_sampled")?;
                        for r in &rows {
                            writeln!(out, "{}\t{}\t{}\t{}", r.bucket_lo, r.bucket_hi, r.n_docs, r.n_sampled)?;
                        }
                    }
                    OutputFormat::Json => write_json_line(&mut out, &rows)?,
                }
                out.flush()?;
                drop(out);
                writeln!(self.stderr, "unreadable\t{}", assignment.unreadable)?;
            }
            FreCommand::Summary(io) => {
                let mut summary = FreSummary::default();
                let mut n_docs = 0usize;
                self.for_each_doc(&io.input, |d| readability::compute_fre_with(seg, &d), |r: ReadabilityReport| {
                    n_docs += 1;
                    summary.add(&r);
                    Ok(())
                })?;
                #[derive(Serialize)]
                struct Row {
                    n_docs: usize,
                    n_readable: usize,
                    mean_fre: Option<f64>,
                    pooled_fre: Option<f64>,
                }
                let row = Row {
                    n_docs,
                    n_readable: summary.n_readable,
                    mean_fre: summary.mean_fre,
                    pooled_fre: summary.pooled_fre,
                };
                let format = self.config.format;
                let mut out = self.output(&io.out)?;
                match format {
                    OutputFormat::Tsv => {
                        writeln!(out, "n_docs\tn_readable\tmean_fre\tpooled_fre")?;
                        writeln!(out, "{}\t{}\t{}\t{}", row.n_docs, row.n_readable, fmt_opt(row.mean_fre), fmt_opt(row.pooled_fre))?;
                    }
                    OutputFormat::Json => write_json_line(&mut out, &row)?,
                }
                out.flush()?;
            }
        }
        Ok(())
    }

    fn stats(&mut self, args: StatsArgs) -> Result<()> {
        if !(args.freq_threshold >= 0.0 && args.freq_threshold < 1.0) {
            return Err(Error::InvalidArgument(format!("freq threshold {} outside [0, 1)", args.freq_threshold)));
        }
        let seg = Segmenter::global();
        let by_lemma = args.lemma;
        let mut acc = StatsAccumulator::new(by_lemma);
        self.for_each_doc(
            &args.io.input,
            |d| {
                let mut one = StatsAccumulator::new(by_lemma);
                one.add_document(seg, &d);
                one
            },
            |one| {
                acc.merge(one);
                Ok(())
            },
        )?;
        let stats = acc.finish(args.k, args.freq_threshold);
        if let Some(path) = &args.dump {
            let mut f = create_file(path)?;
            acc.write_frequency_dump(&mut f)?;
            f.flush()?;
        }
        let format = self.config.format;
        let mut out = self.output(&args.io.out)?;
        match format {
            OutputFormat::Tsv => {
                writeln!(
                    out,
                    "n_docs\ttotal_word_tokens\ttotal_sentences\tavg_doc_len_words\tavg_doc_len_sentences\tvocab_size\tdistinct_words\tavg_doc_vocab\tfrequent_words\tk\ttop_k_cumulative"
                )?;
                writeln!(
                    out,
                    "{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}\t{}",
                    stats.n_docs,
                    stats.total_word_tokens,
                    stats.total_sentences,
                    stats.avg_doc_len_words,
                    stats.avg_doc_len_sentences,
                    stats.vocab_size,
                    stats.distinct_words,
                    stats.avg_doc_vocab,
                    stats.frequent_words,
                    stats.k,
                    fmt_opt(stats.top_k_cumulative)
                )?;
            }
            OutputFormat::Json => write_json_line(&mut out, &stats)?,
        }
        out.flush()?;
        Ok(())
    }

    fn density(&mut self, args: DensityArgs) -> Result<()> {
        let seg = Segmenter::global();
        let patterns = csk_density::load_assertions_with(
            seg,
            open_file(&args.assertions)?,
            &args.assertions.display().to_string(),
            args.min_support,
            args.top_properties,
        )?;
        let set = PatternSet::new(patterns)?.loose(args.loose);
        let mut dump = args.matches.as_ref().map(|p| create_file(p)).transpose()?;
        let format = self.config.format;
        if args.by_bucket {
            let config = BucketConfig::new(args.width, args.sample, self.config.require_seed()?)?;
            let mut sampler = BucketDensitySampler::new(&set, config);
            self.for_each_doc(
                &args.io.input,
                |d| {
                    let (r, m) = BucketDensitySampler::analyze(&set, seg, &d);
                    (d.id, r, m)
                },
                |(id, r, m)| {
                    if let Some(f) = dump.as_mut() {
                        csk_density::write_match_dump(f, &set.events(&id, &m))?;
                    }
                    sampler.offer(&r, m);
                    Ok(())
                },
            )?;
            let curve = sampler.finish();
            let mut out = self.output(&args.io.out)?;
            match format {
                OutputFormat::Tsv => csk_density::write_bucket_curve(&mut out, &curve)?,
                OutputFormat::Json => write_json_line(&mut out, &curve)?,
            }
            out.flush()?;
        } else {
            let mut acc = DensityAccumulator::default();
            self.for_each_doc(
                &args.io.input,
                |d| {
                    let m = set.spot_document(seg, &d);
                    (d.id, m)
                },
                |(id, m)| {
                    if let Some(f) = dump.as_mut() {
                        csk_density::write_match_dump(f, &set.events(&id, &m))?;
                    }
                    acc.add(&m);
                    Ok(())
                },
            )?;
            let report = acc.report();
            let mut out = self.output(&args.io.out)?;
            match format {
                OutputFormat::Tsv => {
                    writeln!(out, "total_matches\tdistinct_patterns_matched\tn_sentences\tn_words\tper_sentence\tper_word")?;
                    writeln!(
                        out,
                        "{}\t{}\t{}\t{}\t{}\t{}",
                        report.total_matches,
                        report.distinct_patterns_matched,
                        report.n_sentences,
                        report.n_words,
                        fmt_opt(report.per_sentence),
                        fmt_opt(report.per_word)
                    )?;
                }
                OutputFormat::Json => write_json_line(&mut out, &report)?,
            }
            out.flush()?;
        }
        if let Some(mut f) = dump {
            f.flush()?;
        }
        Ok(())
    }

    fn connect(&mut self, args: &ScorerArgs) -> Result<Box<dyn Scorer>> {
        let spec = args
            .scorer
            .as_deref()
            .ok_or_else(|| Error::InvalidArgument("--scorer is required".into()))?;
        if let Some(path) = spec.strip_prefix("mock:") {
            let path = PathBuf::from(path);
            let docs = self.read_corpus(&path)?;
            let mock = MockScorer::from_documents(Segmenter::global(), &docs)?.with_mask_marker(&args.mask_marker);
            return Ok(Box::new(mock));
        }
        if !(args.timeout > 0.0 && args.timeout.is_finite()) {
            return Err(Error::InvalidArgument("--timeout must be positive".into()));
        }
        let endpoint: Endpoint = spec.parse()?;
        let policy = RetryPolicy {
            timeout: Duration::from_secs_f64(args.timeout),
            retries: args.retries,
            ..RetryPolicy::default()
        };
        Ok(Box::new(ProtocolScorer::connect(&endpoint, policy, Some(&args.mask_marker))?))
    }

    fn read_corpus(&mut self, path: &Path) -> Result<Vec<Document>> {
        let mut docs = Vec::new();
        self.for_each_doc(path, |d| d, |d| {
            docs.push(d);
            Ok(())
        })?;
        Ok(docs)
    }

    fn probes(&mut self, action: ProbesCommand) -> Result<()> {
        let ProbesCommand::Build {
            triples,
            mask,
            dataset,
            scorer,
            out,
            skips,
        } = action;
        let triples = probe_builder::parse_triples(open_file(&triples)?, &triples.display().to_string())?;
        let mode = match mask {
            MaskArg::Object => MaskMode::Object,
            MaskArg::Predicate => MaskMode::Predicate,
            MaskArg::Template => MaskMode::Template,
        };
        let options = ProbeOptions::new(mode, dataset.into()).with_marker(&scorer.mask_marker);
        let mut backend = self.connect(&scorer)?;
        let seg = Segmenter::global();
        let prepared = self.pool_install(|| triples.par_iter().map(|t| probe_builder::prepare(seg, t, &options)).collect());
        let set = probe_builder::finalize(prepared, &mut backend)?;
        {
            let mut w = self.output(&out)?;
            probe_builder::write_probes_jsonl(&mut w, &set.probes)?;
            w.flush()?;
        }
        if let Some(path) = skips {
            let mut f = create_file(&path)?;
            probe_builder::write_skip_report(&mut f, &set.skips)?;
            f.flush()?;
        }
        let mut counts: Vec<_> = set.skip_counts().into_iter().collect();
        counts.sort();
        let detail: Vec<String> = counts.iter().map(|(r, n)| format!("{r}={n}")).collect();
        writeln!(
            self.stderr,
            "probes\t{}\tskipped\t{}\t{}",
            set.probes.len(),
            set.skips.len(),
            detail.join(",")
        )?;
        Ok(())
    }

    fn score_probes(&mut self, scorer: &mut dyn Scorer, probes: &[Probe], top_k: usize, batch: usize) -> Result<Vec<scorer::RankedPrediction>> {
        if batch == 0 {
            return Err(Error::InvalidArgument("--batch must be at least 1".into()));
        }
        let requests: Vec<ScoreRequest> = probes.iter().map(|p| ScoreRequest::new(&p.probe_id, &p.text, top_k)).collect();
        let mut preds = Vec::with_capacity(requests.len());
        for chunk in requests.chunks(batch) {
            preds.extend(scorer.score_batch(chunk)?);
        }
        Ok(preds)
    }

    fn eval(&mut self, action: EvalCommand) -> Result<()> {
        match action {
            EvalCommand::Mrr {
                probes,
                predictions,
                scorer,
                label,
                group,
                k,
                top_k,
                batch,
                multi_gold,
                dump,
                significance,
                iterations,
                out,
            } => {
                let probes = probe_builder::read_probes_jsonl(open_file(&probes)?, &probes.display().to_string())?;
                let mut runs: Vec<(String, Vec<EvalRecord>)> = Vec::new();
                if scorer.scorer.is_some() {
                    let mut backend = self.connect(&scorer)?;
                    let preds = self.score_probes(&mut *backend, &probes, top_k, batch)?;
                    if let Some(path) = &dump {
                        let mut f = create_file(path)?;
                        eval_metrics::write_predictions_jsonl(&mut f, &preds)?;
                        f.flush()?;
                    }
                    runs.push((label.clone(), eval_metrics::build_records(&probes, &preds, multi_gold)?));
                }
                for spec in &predictions {
                    let (name, path) = match spec.split_once('=') {
                        Some((n, p)) if !n.is_empty() => (n.to_string(), PathBuf::from(p)),
                        _ => {
                            let p = PathBuf::from(spec);
                            let stem = p.file_stem().map_or_else(|| spec.clone(), |s| s.to_string_lossy().into_owned());
                            (stem, p)
                        }
                    };
                    let preds = eval_metrics::read_predictions_jsonl(open_file(&path)?, &path.display().to_string())?;
                    runs.push((name, eval_metrics::build_records(&probes, &preds, multi_gold)?));
                }
                if runs.is_empty() {
                    return Err(Error::InvalidArgument("give --scorer or at least one --predictions dump".into()));
                }
                let group_by = match group {
                    GroupArg::None => GroupBy::All,
                    GroupArg::Dataset => GroupBy::DatasetTag,
                    GroupArg::Typicality => GroupBy::TypicalityBand,
                };
                let mut rows: Vec<(String, MetricsReport)> = Vec::new();
                for (name, records) in &runs {
                    let agg = eval_metrics::aggregate(records, group_by, &k)?;
                    for w in agg.warnings {
                        writeln!(self.stderr, "warning: {name}: {w}")?;
                    }
                    rows.extend(agg.reports.into_iter().map(|r| (name.clone(), r)));
                }
                if let Some(path) = significance {
                    let seed = self.config.require_seed()?;
                    let labels: Vec<String> = runs.iter().map(|(n, _)| n.clone()).collect();
                    let mut matrix = vec![vec![1.0; runs.len()]; runs.len()];
                    for i in 0..runs.len() {
                        for j in i + 1..runs.len() {
                            let p = self.significance(&runs[i].1, &runs[j].1, iterations, seed)?.0;
                            matrix[i][j] = p;
                            matrix[j][i] = p;
                        }
                    }
                    let mut f = create_file(&path)?;
                    eval_metrics::write_significance_tsv(&mut f, &labels, &matrix)?;
                    f.flush()?;
                }
                let format = self.config.format;
                let mut w = self.output(&out)?;
                match format {
                    OutputFormat::Tsv => eval_metrics::write_report_tsv(&mut w, &rows)?,
                    OutputFormat::Json => {
                        #[derive(Serialize)]
                        struct Row<'r> {
                            scorer: &'r str,
                            #[serde(flatten)]
                            report: &'r MetricsReport,
                        }
                        let rows: Vec<Row> = rows.iter().map(|(s, r)| Row { scorer: s, report: r }).collect();
                        write_json_line(&mut w, &rows)?;
                    }
                }
                w.flush()?;
            }
            EvalCommand::Significance {
                probes,
                a,
                b,
                iterations,
                multi_gold,
            } => {
                let seed = self.config.require_seed()?;
                let probes = probe_builder::read_probes_jsonl(open_file(&probes)?, &probes.display().to_string())?;
                let load = |p: &Path| -> Result<Vec<EvalRecord>> {
                    let preds = eval_metrics::read_predictions_jsonl(open_file(p)?, &p.display().to_string())?;
                    eval_metrics::build_records(&probes, &preds, multi_gold)
                };
                let (ra, rb) = (load(&a)?, load(&b)?);
                let (p, diff) = self.significance(&ra, &rb, iterations, seed)?;
                let mean = |r: &[EvalRecord]| r.iter().map(EvalRecord::reciprocal_rank).sum::<f64>() / r.len() as f64;
                #[derive(Serialize)]
                struct Row {
                    mrr_a: f64,
                    mrr_b: f64,
                    mean_diff: f64,
                    iterations: u64,
                    p_value: f64,
                }
                let row = Row {
                    mrr_a: mean(&ra),
                    mrr_b: mean(&rb),
                    mean_diff: diff,
                    iterations,
                    p_value: p,
                };
                match self.config.format {
                    OutputFormat::Tsv => {
                        writeln!(self.stdout, "mrr_a\tmrr_b\tmean_diff\titerations\tp_value")?;
                        writeln!(self.stdout, "{}\t{}\t{}\t{}\t{}", row.mrr_a, row.mrr_b, row.mean_diff, row.iterations, row.p_value)?;
                    }
                    OutputFormat::Json => write_json_line(&mut *self.stdout, &row)?,
                }
            }
        }
        Ok(())
    }

    /// Bootstrap with resamples split across the pool in fixed-size ranges.
    fn significance(&self, a: &[EvalRecord], b: &[EvalRecord], iterations: u64, seed: u64) -> Result<(f64, f64)> {
        const RANGE: u64 = 256;
        let boot = Bootstrap::new(eval_metrics::paired_differences(a, b)?, seed)?;
        let n_ranges = iterations.div_ceil(RANGE);
        let flips: u64 = self.pool_install(|| {
            (0..n_ranges)
                .into_par_iter()
                .map(|i| boot.count_flips(i * RANGE..((i + 1) * RANGE).min(iterations)))
                .sum()
        });
        Ok((boot.p_value(flips, iterations), boot.observed_mean()))
    }

    fn mock_scorer(&mut self, args: MockScorerArgs) -> Result<()> {
        let docs = self.read_corpus(&args.corpus)?;
        let mut mock = MockScorer::from_documents(Segmenter::global(), &docs)?.with_mask_marker(&args.mask_marker);
        let vocab = Some(mock.vocab_size() as u64);
        if let Some(addr) = &args.tcp {
            let listener = TcpListener::bind(addr).map_err(|e| Error::InvalidArgument(format!("cannot listen on {addr}: {e}")))?;
            writeln!(self.stdout, "listening\t{}", listener.local_addr()?)?;
            self.stdout.flush()?;
            scorer::protocol::serve_tcp(listener, mock, vocab)?;
        } else if args.stdio {
            scorer::protocol::serve(&mut mock, vocab, &mut *self.stdin, &mut *self.stdout)?;
        } else {
            return Err(Error::InvalidArgument("choose --stdio or --tcp ADDR".into()));
        }
        Ok(())
    }
}

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::Instant;

use clap::Args;
use gprn_core::audit::{
    biahs_run, contamination_rate, load_correctness, render_needles, score_gap, split_benchmark,
    BenchmarkSet, ContaminationOptions, ContaminationReport, QueryMode,
};
use gprn_core::corpus_io::{
    config_hash, DocReader, ReadOptions, RunReport, ShardWriter, WriteOptions,
};
use gprn_core::dedup::{Deduplicator, SignatureCache, DEFAULT_SPLITS};
use gprn_core::error::{Error, Result};
use gprn_core::filtering::{
    self, bucket_gate, heuristic_filter, scorer_from_spec, FilterDecision, Scorer, TopFraction,
};
use gprn_core::game::{self, GameParams, SweepAxis};
use gprn_core::mixing::{self, ManifestSource, MixSchedule, PoisonDoc, SourceRegistry};
use gprn_core::ngram_index::{
    build_index, NGramIndex, NormalizationSpec, TokenMode, DEFAULT_MIN_QUERY_TOKENS,
};
use gprn_core::packing::{
    tokenize_chunked, tokenizer_from_name, PackConfig, Packer, ShuffleBuffer, TokenShardWriter,
    Tokenizer, DEFAULT_BUFFER_SIZE, DEFAULT_CHUNK_BYTES, DEFAULT_GROUP_SIZE, DEFAULT_SEQ_LEN,
};
use gprn_core::{synth, Document, ShardManifest};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::Serialize;

use crate::config::{GameBlock, RunConfig};
use crate::{Command, GlobalArgs, SynthKind};

const BATCH: usize = 4096;

#[derive(Debug, Clone, Args, Serialize)]
pub struct IoArgs {
    /// Input shard directory, manifest or single shard.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output shard directory.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct FilterArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// Require enriched statistics instead of computing missing ones.
    #[arg(long)]
    pub strict: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GateArgs {
    #[command(flatten)]
    pub io: IoArgs,
    /// `wordlist`, `constant:X`, `random:SEED` or `precomputed:PATH`.
    #[arg(long)]
    pub scorer: Option<String>,
    /// Fraction of bucket-gated documents to keep (default 0.1).
    #[arg(long)]
    pub fraction: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct DedupArgs {
    #[command(flatten)]
    pub io: IoArgs,
    #[arg(long)]
    pub splits: Option<usize>,
    #[arg(long)]
    pub shingle_size: Option<usize>,
    /// Confirm LSH candidates with an exact Jaccard check.
    #[arg(long)]
    pub verify_threshold: Option<f64>,
    #[arg(long)]
    pub single_stage: bool,
    /// Let stage-two representatives keep the bands of absorbed members.
    #[arg(long)]
    pub carry_member_bands: bool,
    /// Cluster report (TSV).
    #[arg(long)]
    pub clusters: Option<PathBuf>,
    /// Signature cache; read when present, written otherwise.
    #[arg(long)]
    pub cache: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct MixArgs {
    /// Schedule TOML, or `builtin:8b` for the bundled five-phase schedule.
    #[arg(long)]
    pub schedule: Option<String>,
    /// Source location, repeatable.
    #[arg(long = "source", value_name = "NAME=PATH")]
    pub sources: Vec<String>,
    /// Divide every phase budget by this factor.
    #[arg(long)]
    pub scale: Option<f64>,
    #[arg(long)]
    pub tokenizer: Option<String>,
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PackArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Output directory for `tokens.bin` and `packed.bin`.
    #[arg(short, long)]
    pub output: PathBuf,
    #[arg(long)]
    pub seq_len: Option<usize>,
    #[arg(long)]
    pub group_size: Option<usize>,
    #[arg(long)]
    pub buffer_size: Option<usize>,
    #[arg(long)]
    pub tokenizer: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct IndexArgs {
    #[arg(short, long)]
    pub input: PathBuf,
    /// Index file.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Index bytes instead of words.
    #[arg(long)]
    pub byte: bool,
    #[arg(long)]
    pub keep_case: bool,
    #[arg(long)]
    pub keep_punctuation: bool,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct ContamArgs {
    #[arg(long)]
    pub index: PathBuf,
    /// Benchmark JSONL.
    #[arg(long)]
    pub bench: PathBuf,
    /// Report JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// Query with the question followed by its answer.
    #[arg(long)]
    pub question_answer: bool,
    #[arg(long)]
    pub min_query_tokens: Option<usize>,
    /// Exclude samples found in more than this fraction of documents.
    #[arg(long)]
    pub generic_doc_fraction: Option<f64>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SplitArgs {
    /// Contamination report JSON written by `contam`.
    #[arg(long)]
    pub contamination: PathBuf,
    #[arg(long)]
    pub bench: PathBuf,
    /// Directory for `contaminated.jsonl`, `clean.jsonl` and `excluded.txt`.
    #[arg(short, long)]
    pub output: PathBuf,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GapArgs {
    /// Per-sample correctness: JSONL rows of `{id, correct}`.
    #[arg(long)]
    pub correct: PathBuf,
    #[arg(long)]
    pub contaminated: PathBuf,
    #[arg(long)]
    pub clean: PathBuf,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct BiahsArgs {
    /// Haystack shards.
    #[arg(short, long)]
    pub input: PathBuf,
    /// Benchmark JSONL; repeatable, one needle family per file.
    #[arg(long, required = true)]
    pub bench: Vec<PathBuf>,
    /// Scorer spec; repeatable (default `wordlist`).
    #[arg(long)]
    pub scorer: Vec<String>,
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct PoisonArgs {
    /// Poison documents (shards).
    #[arg(long)]
    pub poison: PathBuf,
    /// Length of the training stream in tokens.
    #[arg(long)]
    pub total_tokens: Option<u64>,
    /// Base stream; sets the total when `--total-tokens` is absent.
    #[arg(short, long)]
    pub input: Option<PathBuf>,
    /// Plan JSON.
    #[arg(short, long)]
    pub output: PathBuf,
    /// Write the base stream with poison inserted to this directory.
    #[arg(long)]
    pub inject: Option<PathBuf>,
    #[arg(long)]
    pub tokenizer: Option<String>,
}

#[derive(Debug, Clone, Default, Args, Serialize)]
pub struct GameParamArgs {
    /// TOML file with `m`, `alpha`, `beta`, `gamma` and `p`.
    #[arg(long)]
    pub params: Option<PathBuf>,
    #[arg(long)]
    pub m: Option<f64>,
    #[arg(long)]
    pub alpha: Option<f64>,
    #[arg(long)]
    pub beta: Option<f64>,
    #[arg(long)]
    pub gamma: Option<f64>,
    /// `pow:K`, `logistic:S:MID`, `pwl:C,P;...` or `pchip:C,P;...`.
    #[arg(long)]
    pub p: Option<String>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct GameArgs {
    #[command(flatten)]
    pub params: GameParamArgs,
    /// Equilibrium JSON.
    #[arg(short, long)]
    pub output: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SweepArgs {
    #[command(flatten)]
    pub params: GameParamArgs,
    /// `m`, `alpha`, `beta`, `gamma` or `p`.
    #[arg(long)]
    pub axis: String,
    /// Comma-separated values.
    #[arg(long, conflicts_with_all = ["from", "to", "steps"])]
    pub values: Option<String>,
    #[arg(long)]
    pub from: Option<f64>,
    #[arg(long)]
    pub to: Option<f64>,
    #[arg(long)]
    pub steps: Option<usize>,
    /// TSV table (default: stdout).
    #[arg(short, long)]
    pub output: Option<PathBuf>,
    /// SVG plot of c* against the swept value.
    #[arg(long)]
    pub plot: Option<PathBuf>,
}

#[derive(Debug, Clone, Args, Serialize)]
pub struct SynthArgs {
    #[arg(value_enum)]
    pub kind: SynthKind,
    /// Documents or samples to generate.
    #[arg(long)]
    pub count: Option<usize>,
    /// Benchmark name, or the id prefix for a corpus.
    #[arg(long)]
    pub name: Option<String>,
    /// Shard directory (corpus), JSONL file (benchmark) or directory (needles).
    #[arg(short, long)]
    pub output: PathBuf,
}

/// Shared state for one command invocation.
pub struct Ctx {
    pub config: RunConfig,
    pub seed: u64,
    /// Whether the seed came from a flag or the config file.
    pub seed_explicit: bool,
    pub dry_run: bool,
    pub report: RunReport,
    prefix: String,
}

impl Ctx {
    pub fn new(config: RunConfig, seed: Option<u64>, dry_run: bool, report: RunReport) -> Self {
        Ctx {
            config,
            seed: seed.unwrap_or(0),
            seed_explicit: seed.is_some(),
            dry_run,
            report,
            prefix: String::new(),
        }
    }

    /// Namespaces subsequent counters and details, e.g. `filter.`.
    pub fn set_prefix(&mut self, prefix: &str) {
        self.prefix = prefix.to_string();
    }

    pub fn count(&mut self, key: &str, v: impl Into<f64>) {
        let key = format!("{}{key}", self.prefix);
        self.report.count(&key, v);
    }

    pub fn detail(&mut self, key: &str, v: impl Serialize) {
        let key = format!("{}{key}", self.prefix);
        if !self.report.details.is_object() {
            self.report.details = serde_json::Value::Object(Default::default());
        }
        let v = serde_json::to_value(v).expect("details serialize");
        self.report.details.as_object_mut().unwrap().insert(key, v);
    }

    fn write_options(&self) -> WriteOptions {
        let mut opts = WriteOptions::default();
        if let Some(n) = self.config.output.shard_limit {
            opts.shard_limit = n;
        }
        if let Some(g) = self.config.output.gzip {
            opts.gzip = g;
        }
        opts
    }

    pub fn sink(&self, out: &Path) -> Result<DocSink> {
        let writer = if self.dry_run {
            None
        } else {
            Some(ShardWriter::create(out, self.write_options())?)
        };
        Ok(DocSink { writer, docs: 0 })
    }

    fn read_done(&mut self, reader: &DocReader) {
        let r = reader.report();
        self.count("docs_in", r.docs as f64);
        if r.skipped > 0 {
            self.count("skipped", r.skipped as f64);
            self.detail("skipped_samples", &r.skipped_samples);
        }
    }
}

/// Shard output that swallows writes in dry-run mode.
pub struct DocSink {
    writer: Option<ShardWriter>,
    docs: u64,
}

impl DocSink {
    pub fn push(&mut self, doc: &Document) -> Result<()> {
        self.docs += 1;
        match &mut self.writer {
            Some(w) => w.push(doc),
            None => Ok(()),
        }
    }

    pub fn finish(self) -> Result<u64> {
        if let Some(w) = self.writer {
            w.finish()?;
        }
        Ok(self.docs)
    }
}

/// A missing input is a usage mistake rather than an I/O failure.
pub fn need(path: &Path) -> Result<()> {
    if path.exists() {
        Ok(())
    } else {
        Err(Error::config(format!(
            "input `{}` does not exist",
            path.display()
        )))
    }
}

pub fn open_reader(input: &Path) -> Result<DocReader> {
    need(input)?;
    Ok(DocReader::new(
        ShardManifest::open(input)?,
        ReadOptions::default(),
    ))
}

/// Yields `Ok` values until the first error, which lands in `slot`.
pub fn until_err<'a, T: 'a>(
    it: impl Iterator<Item = Result<T>> + 'a,
    slot: &'a mut Option<Error>,
) -> impl Iterator<Item = T> + 'a {
    it.map_while(move |r| match r {
        Ok(v) => Some(v),
        Err(e) => {
            *slot = Some(e);
            None
        }
    })
}

/// Applies `f` to batches of documents in parallel and hands the results
/// to `out` in input order.
fn par_stream<T, F, O>(reader: &mut DocReader, f: F, mut out: O) -> Result<()>
where
    T: Send,
    F: Fn(Document) -> Result<T> + Sync,
    O: FnMut(T) -> Result<()>,
{
    loop {
        let batch = reader.by_ref().take(BATCH).collect::<Result<Vec<_>>>()?;
        if batch.is_empty() {
            return Ok(());
        }
        let done = batch.into_par_iter().map(&f).collect::<Result<Vec<T>>>()?;
        for t in done {
            out(t)?;
        }
    }
}

/// Fixed-precision rendering without trailing zeros.
pub fn fmt_num(x: f64) -> String {
    let s = format!("{x:.9}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s == "-0" {
        "0".into()
    } else {
        s.into()
    }
}

fn report_path_for(out: &Path) -> PathBuf {
    let name = out
        .file_name()
        .map(|n| n.to_string_lossy().into_owned())
        .unwrap_or_else(|| "run".into());
    out.with_file_name(format!("{name}.report.json"))
}

fn write_text(ctx: &Ctx, path: &Path, text: &str) -> Result<()> {
    if ctx.dry_run {
        return Ok(());
    }
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    }
    fs::write(path, text).map_err(|e| Error::io(path, e))
}

fn write_json(ctx: &Ctx, path: &Path, value: &impl Serialize) -> Result<()> {
    let json = serde_json::to_string_pretty(value).expect("serializes");
    write_text(ctx, path, &(json + "\n"))
}

pub fn command_name(command: &Command) -> &'static str {
    match command {
        Command::Enrich(_) => "enrich",
        Command::Filter(_) => "filter",
        Command::Gate(_) => "gate",
        Command::Dedup(_) => "dedup",
        Command::Mix(_) => "mix",
        Command::Pack(_) => "pack",
        Command::Index(_) => "index",
        Command::Contam(_) => "contam",
        Command::Split(_) => "split",
        Command::Gap(_) => "gap",
        Command::Biahs(_) => "biahs",
        Command::Poison(_) => "poison",
        Command::Game(_) => "game",
        Command::Sweep(_) => "sweep",
        Command::Pipeline(_) => "pipeline",
        Command::Synth(_) => "synth",
    }
}

pub fn run(global: GlobalArgs, command: Command) -> Result<()> {
    let started = Instant::now();
    let config = match &global.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(n) = global.threads.or(config.threads) {
        if n == 0 {
            return Err(Error::config("--threads must be >= 1"));
        }
        // Fails only if a pool already exists, which is harmless here.
        let _ = rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global();
    }
    let seed = global.seed.or(config.seed);
    let name = command_name(&command);
    let hash = config_hash(&serde_json::json!({
        "command": &command,
        "config": &config,
        "seed": seed.unwrap_or(0),
    }));
    let mut report = RunReport::new(name, &hash, seed.unwrap_or(0));
    report.dry_run = global.dry_run;
    let mut ctx = Ctx::new(config, seed, global.dry_run, report);

    let out = match command {
        Command::Enrich(a) => enrich(&mut ctx, a),
        Command::Filter(a) => filter(&mut ctx, a),
        Command::Gate(a) => gate(&mut ctx, a),
        Command::Dedup(a) => dedup(&mut ctx, a),
        Command::Mix(a) => mix(&mut ctx, a),
        Command::Pack(a) => pack(&mut ctx, a),
        Command::Index(a) => index(&mut ctx, a),
        Command::Contam(a) => contam(&mut ctx, a),
        Command::Split(a) => split(&mut ctx, a),
        Command::Gap(a) => gap(&mut ctx, a),
        Command::Biahs(a) => biahs(&mut ctx, a),
        Command::Poison(a) => poison(&mut ctx, a),
        Command::Game(a) => game_cmd(&mut ctx, a),
        Command::Sweep(a) => sweep(&mut ctx, a),
        Command::Pipeline(a) => crate::pipeline::run(&mut ctx, a),
        Command::Synth(a) => synth_cmd(&mut ctx, a),
    }?;

    ctx.report.wall_time_secs = started.elapsed().as_secs_f64();
    let summary: Vec<String> = ctx
        .report
        .counters
        .iter()
        .map(|(k, v)| format!("{k}={}", fmt_num(*v)))
        .collect();
    if !summary.is_empty() {
        eprintln!("{name}: {}", summary.join(" "));
    }
    let target = match (&global.report, ctx.dry_run, &out) {
        (Some(p), _, _) => Some(p.clone()),
        (None, false, Some(o)) => Some(report_path_for(o)),
        _ => None,
    };
    match target {
        Some(p) => ctx.report.save(p),
        None => {
            if ctx.dry_run {
                eprintln!(
                    "{}",
                    serde_json::to_string_pretty(&ctx.report).expect("report serializes")
                );
            }
            Ok(())
        }
    }
}

pub fn enrich(ctx: &mut Ctx, a: IoArgs) -> Result<Option<PathBuf>> {
    let cfg = ctx.config.filter_config()?;
    let mut reader = open_reader(&a.input)?;
    let mut sink = ctx.sink(&a.output)?;
    par_stream(
        &mut reader,
        |d| filtering::enrich(d, &cfg),
        |d| sink.push(&d),
    )?;
    ctx.read_done(&reader);
    ctx.count("docs_out", sink.finish()? as f64);
    Ok(Some(a.output))
}

pub fn filter(ctx: &mut Ctx, a: FilterArgs) -> Result<Option<PathBuf>> {
    let cfg = ctx.config.filter_config()?;
    let mut reader = open_reader(&a.io.input)?;
    let mut sink = ctx.sink(&a.io.output)?;
    let mut dropped: BTreeMap<String, u64> = BTreeMap::new();
    par_stream(
        &mut reader,
        |d| {
            let decision = heuristic_filter(&d, &cfg, a.strict)?;
            Ok((d, decision))
        },
        |(d, decision)| match decision {
            FilterDecision::Keep => sink.push(&d),
            FilterDecision::Drop { rule, .. } => {
                *dropped.entry(rule.to_string()).or_default() += 1;
                Ok(())
            }
        },
    )?;
    ctx.read_done(&reader);
    for (rule, n) in dropped {
        ctx.count(&format!("dropped.{rule}"), n as f64);
    }
    ctx.count("docs_out", sink.finish()? as f64);
    Ok(Some(a.io.output))
}

/// Bucket-gates a document and scores it when it passes.
fn gated_score(mut d: Document, scorer: &dyn Scorer) -> Result<Option<(Document, f64)>> {
    if !bucket_gate(&mut d)?.keep {
        return Ok(None);
    }
    let s = scorer.score(&d)?;
    d.set_meta("quality_score", s);
    Ok(Some((d, s)))
}

pub fn gate(ctx: &mut Ctx, a: GateArgs) -> Result<Option<PathBuf>> {
    let spec = a
        .scorer
        .or(ctx.config.gate.scorer.clone())
        .unwrap_or_else(|| "wordlist".into());
    let fraction = a.fraction.or(ctx.config.gate.fraction).unwrap_or(0.1);
    let scorer = scorer_from_spec(&spec)?;

    // Pass 1: bucket counts.
    let mut buckets: BTreeMap<String, u64> = BTreeMap::new();
    let mut gated = 0u64;
    let mut reader = open_reader(&a.io.input)?;
    for d in reader.by_ref() {
        let mut d = d?;
        let g = bucket_gate(&mut d)?;
        *buckets.entry(g.bucket.name()).or_default() += 1;
        gated += g.keep as u64;
    }
    ctx.read_done(&reader);
    for (b, n) in buckets {
        ctx.count(&format!("bucket.{b}"), n as f64);
    }
    ctx.count("gated", gated as f64);

    // Pass 2: score threshold over gated documents.
    let mut top = TopFraction::new(fraction, gated)?;
    let mut reader = open_reader(&a.io.input)?;
    par_stream(
        &mut reader,
        |d| gated_score(d, scorer.as_ref()),
        |r| match r {
            Some((d, s)) => top.observe(&d.id, s),
            None => Ok(()),
        },
    )?;
    let threshold = top.threshold()?;

    // Pass 3: write survivors in input order.
    let mut sink = ctx.sink(&a.io.output)?;
    let mut reader = open_reader(&a.io.input)?;
    par_stream(
        &mut reader,
        |d| gated_score(d, scorer.as_ref()),
        |r| match r {
            Some((d, s)) if threshold.keeps(&d.id, s) => sink.push(&d),
            _ => Ok(()),
        },
    )?;
    ctx.count("docs_out", sink.finish()? as f64);
    ctx.detail("scorer", scorer.name());
    ctx.detail("fraction", fraction);
    Ok(Some(a.io.output))
}

pub fn dedup(ctx: &mut Ctx, a: DedupArgs) -> Result<Option<PathBuf>> {
    let cfg = ctx.config.dedup.clone();
    let mut d = Deduplicator::new(ctx.seed);
    if let Some(k) = a.shingle_size.or(cfg.shingle_size) {
        d.shingle.shingle_size = k;
    }
    d.verify_threshold = a.verify_threshold.or(cfg.verify_threshold);
    d.carry_member_bands = a.carry_member_bands || cfg.carry_member_bands.unwrap_or(false);
    let single = a.single_stage || cfg.single_stage.unwrap_or(false);
    let splits = a.splits.or(cfg.splits).unwrap_or(DEFAULT_SPLITS);

    let mut reader = open_reader(&a.io.input)?;
    let docs = reader.by_ref().collect::<Result<Vec<_>>>()?;
    ctx.read_done(&reader);

    let cache = match &a.cache {
        Some(p) if p.exists() => {
            let c = SignatureCache::load(p)?;
            c.check(&d)?;
            Some(c)
        }
        Some(p) => {
            let c = SignatureCache::from_signatures(&d, &d.signatures(&docs)?);
            if !ctx.dry_run {
                c.save(p)?;
            }
            Some(c)
        }
        None => None,
    };
    let outcome = if single {
        d.single_stage_cached(docs, cache.as_ref())?
    } else {
        d.two_stage_cached(docs, splits, cache.as_ref())?
    };
    if let (Some(p), false) = (&a.clusters, ctx.dry_run) {
        outcome.clusters.write_report(p)?;
    }
    ctx.count("removed", outcome.removed() as f64);
    ctx.count("clusters", outcome.clusters.num_clusters() as f64);
    let mut sink = ctx.sink(&a.io.output)?;
    for doc in &outcome.survivors {
        sink.push(doc)?;
    }
    ctx.count("docs_out", sink.finish()? as f64);
    ctx.detail("dedup", &d);
    ctx.detail("splits", if single { 1 } else { splits });
    Ok(Some(a.io.output))
}

fn load_schedule(spec: &str) -> Result<MixSchedule> {
    match spec.strip_prefix("builtin:") {
        Some("8b") => Ok(mixing::bundled_8b_schedule()),
        Some(other) => Err(Error::config(format!("unknown builtin schedule `{other}`"))),
        None => MixSchedule::load(Path::new(spec)),
    }
}

pub fn mix(ctx: &mut Ctx, a: MixArgs) -> Result<Option<PathBuf>> {
    let spec = match (&a.schedule, &ctx.config.mix.schedule) {
        (Some(s), _) => s.clone(),
        (None, Some(p)) => ctx.config.resolve(p).to_string_lossy().into_owned(),
        (None, None) => return Err(Error::config("mix needs --schedule")),
    };
    let mut schedule = load_schedule(&spec)?;
    if let Some(f) = a.scale.or(ctx.config.mix.scale) {
        if !(f > 0.0) {
            return Err(Error::config("--scale must be > 0"));
        }
        schedule = schedule.scaled(f);
    }
    if ctx.seed_explicit {
        schedule.seed = ctx.seed;
    }
    let mut locations = schedule.sources.clone();
    for (name, p) in &ctx.config.mix.sources {
        locations.insert(name.clone(), ctx.config.resolve(p));
    }
    for s in &a.sources {
        let (name, p) = s
            .split_once('=')
            .ok_or_else(|| Error::config(format!("--source expects NAME=PATH, got `{s}`")))?;
        locations.insert(name.to_string(), PathBuf::from(p));
    }
    let mut registry = SourceRegistry::new();
    for (name, p) in &locations {
        registry.insert(
            name.clone(),
            Box::new(ManifestSource::new(ShardManifest::open(p)?)),
        );
    }
    let tok_name = a.tokenizer.unwrap_or_else(|| schedule.tokenizer.clone());
    let tokenizer = tokenizer_from_name(&tok_name)?;
    let names: Vec<String> = schedule.phases.iter().map(|p| p.name.clone()).collect();

    let mut sink = ctx.sink(&a.output)?;
    let mut seen: std::collections::HashMap<String, u64> = Default::default();
    let report = mixing::run_schedule(&schedule, &mut registry, tokenizer.as_ref(), |m| {
        let mut doc = m.doc;
        // Wrapped sources repeat documents; later copies get a fresh id.
        let n = seen.entry(doc.id.clone()).or_insert(0u64);
        if *n > 0 {
            doc.set_meta("orig_id", doc.id.clone());
            doc.id = format!("{}#r{n}", doc.id);
        }
        *n += 1;
        doc.set_meta("mix_phase", names[m.phase].clone());
        doc.set_meta("mix_source", m.source);
        sink.push(&doc)
    })?;
    ctx.count("docs_out", sink.finish()? as f64);
    ctx.count("tokens", report.total_tokens as f64);
    ctx.count("draws", report.draws as f64);
    ctx.detail("mix", &report);
    Ok(Some(a.output))
}

pub fn pack(ctx: &mut Ctx, a: PackArgs) -> Result<Option<PathBuf>> {
    let pc = ctx.config.pack.clone();
    let cfg = PackConfig {
        seq_len: a.seq_len.or(pc.seq_len).unwrap_or(DEFAULT_SEQ_LEN),
        group_size: a.group_size.or(pc.group_size).unwrap_or(DEFAULT_GROUP_SIZE),
    };
    let buffer = a
        .buffer_size
        .or(pc.buffer_size)
        .unwrap_or(DEFAULT_BUFFER_SIZE);
    let tokenizer = tokenizer_from_name(
        a.tokenizer
            .as_deref()
            .or(pc.tokenizer.as_deref())
            .unwrap_or("byte"),
    )?;
    let mut packer = Packer::new(cfg)?;

    let (mut tokens_out, mut packed_out) = if ctx.dry_run {
        (None, None)
    } else {
        fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
        (
            Some(TokenShardWriter::create(a.output.join("tokens.bin"))?),
            Some(TokenShardWriter::create(a.output.join("packed.bin"))?),
        )
    };
    let mut reader = open_reader(&a.input)?;
    let mut err = None;
    let tok: &dyn Tokenizer = tokenizer.as_ref();
    let seqs = until_err(reader.by_ref(), &mut err)
        .map(|d| tokenize_chunked(&d, tok, DEFAULT_CHUNK_BYTES));
    let mut shuffled = ShuffleBuffer::new(seqs, buffer, ChaCha8Rng::seed_from_u64(ctx.seed))?;
    let mut packed = 0u64;
    let mut emit = |seq: &[u32]| -> Result<()> {
        if let Some(w) = packed_out.as_mut() {
            w.write(&format!("pack-{packed:09}"), seq)?;
        }
        packed += 1;
        Ok(())
    };
    for seq in shuffled.by_ref() {
        let seq = seq?;
        if let Some(w) = tokens_out.as_mut() {
            w.write_seq(&seq)?;
        }
        packer.push(&seq.tokens, &mut emit)?;
    }
    let windows = shuffled.windows();
    drop(shuffled);
    if let Some(e) = err {
        return Err(e);
    }
    ctx.read_done(&reader);
    let report = packer.finish();
    if let Some(w) = tokens_out {
        w.finish()?;
    }
    if let Some(w) = packed_out {
        w.finish()?;
    }
    ctx.count("shuffle_windows", windows as f64);
    ctx.count("sequences_out", report.sequences_out as f64);
    ctx.count("tokens_wasted", report.tokens_wasted as f64);
    ctx.detail("pack", &report);
    ctx.detail("tokenizer", tokenizer.id());
    Ok(Some(a.output))
}

pub fn index(ctx: &mut Ctx, a: IndexArgs) -> Result<Option<PathBuf>> {
    let ic = &ctx.config.index;
    let mut spec = if a.byte || ic.byte_mode.unwrap_or(false) {
        NormalizationSpec::byte()
    } else {
        NormalizationSpec::default()
    };
    spec.lowercase = !a.keep_case && ic.lowercase.unwrap_or(true);
    spec.strip_punctuation =
        spec.mode == TokenMode::Word && !a.keep_punctuation && ic.strip_punctuation.unwrap_or(true);
    let mut reader = open_reader(&a.input)?;
    let mut err = None;
    let idx = build_index(until_err(reader.by_ref(), &mut err), spec)?;
    if let Some(e) = err {
        return Err(e);
    }
    ctx.read_done(&reader);
    if !ctx.dry_run {
        idx.save(&a.output)?;
    }
    ctx.count("positions", idx.num_positions() as f64);
    ctx.count("docs_indexed", idx.num_docs() as f64);
    ctx.detail("normalization", spec);
    Ok(Some(a.output))
}

pub fn contam(ctx: &mut Ctx, a: ContamArgs) -> Result<Option<PathBuf>> {
    let cc = ctx.config.contam.clone();
    let min = a
        .min_query_tokens
        .or(ctx.config.index.min_query_tokens)
        .unwrap_or(DEFAULT_MIN_QUERY_TOKENS);
    need(&a.index)?;
    need(&a.bench)?;
    let idx = NGramIndex::load(&a.index)?.with_min_query_tokens(min);
    let bench = BenchmarkSet::load(&a.bench)?;
    let opts = ContaminationOptions {
        mode: if a.question_answer || cc.question_answer.unwrap_or(false) {
            QueryMode::QuestionAnswer
        } else {
            QueryMode::Question
        },
        expected_spec: None,
        generic_doc_fraction: a.generic_doc_fraction.or(cc.generic_doc_fraction),
    };
    let report = contamination_rate(&idx, &bench, &opts)?;
    println!(
        "{}: leak_rate={} leaked={} queryable={} unqueryable={} generic={} median_occurrences={}",
        report.benchmark,
        fmt_num(report.leak_rate),
        report.leaked,
        report.queryable,
        report.unqueryable.len(),
        report.generic.len(),
        report
            .median_occurrences
            .map(fmt_num)
            .unwrap_or_else(|| "-".into()),
    );
    ctx.count("leaked", report.leaked as f64);
    ctx.count("queryable", report.queryable as f64);
    ctx.count("leak_rate", report.leak_rate);
    if let Some(p) = &a.output {
        write_json(ctx, p, &report)?;
    }
    Ok(a.output)
}

pub fn split(ctx: &mut Ctx, a: SplitArgs) -> Result<Option<PathBuf>> {
    need(&a.contamination)?;
    need(&a.bench)?;
    let text = fs::read_to_string(&a.contamination).map_err(|e| Error::io(&a.contamination, e))?;
    let report: ContaminationReport = serde_json::from_str(&text).map_err(|e| {
        Error::data(format!(
            "{}: not a contamination report: {e}",
            a.contamination.display()
        ))
    })?;
    let bench = BenchmarkSet::load(&a.bench)?;
    let splits = split_benchmark(&report, &bench)?;
    if !ctx.dry_run {
        fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
        splits
            .contaminated
            .save(&a.output.join("contaminated.jsonl"))?;
        splits.clean.save(&a.output.join("clean.jsonl"))?;
        let mut excluded = splits.excluded.join("\n");
        if !excluded.is_empty() {
            excluded.push('\n');
        }
        write_text(ctx, &a.output.join("excluded.txt"), &excluded)?;
    }
    ctx.count("contaminated", splits.contaminated.len() as f64);
    ctx.count("clean", splits.clean.len() as f64);
    ctx.count("excluded", splits.excluded.len() as f64);
    Ok(Some(a.output))
}

pub fn gap(ctx: &mut Ctx, a: GapArgs) -> Result<Option<PathBuf>> {
    for p in [&a.correct, &a.contaminated, &a.clean] {
        need(p)?;
    }
    let correct = load_correctness(&a.correct)?;
    let cont = BenchmarkSet::load(&a.contaminated)?;
    let clean = BenchmarkSet::load(&a.clean)?;
    let report = score_gap(&correct, &cont, &clean)?;
    print!("{}", report.render());
    if let Some(g) = report.overall.gap {
        ctx.count("gap_points", g);
    }
    if let Some(p) = &a.output {
        write_json(ctx, p, &report)?;
    }
    Ok(a.output)
}

pub fn biahs(ctx: &mut Ctx, a: BiahsArgs) -> Result<Option<PathBuf>> {
    let mut needles = Vec::new();
    for p in &a.bench {
        need(p)?;
        needles.extend(render_needles(&BenchmarkSet::load(p)?));
    }
    let specs = if a.scorer.is_empty() {
        vec!["wordlist".to_string()]
    } else {
        a.scorer.clone()
    };
    let scorers = specs
        .iter()
        .map(|s| scorer_from_spec(s))
        .collect::<Result<Vec<_>>>()?;
    let refs: Vec<&dyn Scorer> = scorers.iter().map(|s| s.as_ref()).collect();
    let mut reader = open_reader(&a.input)?;
    let result = biahs_run(reader.by_ref(), &needles, &refs)?;
    ctx.read_done(&reader);
    print!("{}", result.render());
    ctx.count("needles", result.needle_docs as f64);
    ctx.count("total_docs", result.total_docs as f64);
    if let Some(p) = &a.output {
        write_json(ctx, p, &result)?;
    }
    Ok(a.output)
}

pub fn poison(ctx: &mut Ctx, a: PoisonArgs) -> Result<Option<PathBuf>> {
    let tokenizer = tokenizer_from_name(a.tokenizer.as_deref().unwrap_or("byte"))?;
    let mut reader = open_reader(&a.poison)?;
    let poison_docs = reader.by_ref().collect::<Result<Vec<_>>>()?;
    let planned = poison_docs
        .iter()
        .map(|d| {
            Ok(PoisonDoc {
                id: d.id.clone(),
                tokens: tokenizer.count(&d.text)?,
            })
        })
        .collect::<Result<Vec<_>>>()?;

    let total = match (a.total_tokens.or(ctx.config.poison.total_tokens), &a.input) {
        (Some(t), _) => t,
        (None, Some(base)) => {
            let mut t = 0u64;
            for d in open_reader(base)? {
                t += tokenizer.count(&d?.text)?;
            }
            t
        }
        (None, None) => return Err(Error::config("poison needs --total-tokens or --input")),
    };
    let mut rng = ChaCha8Rng::seed_from_u64(ctx.seed);
    let plan = mixing::schedule_poison(planned, total, &mut rng)?;
    write_json(ctx, &a.output, &plan)?;
    ctx.count("poison_docs", plan.docs.len() as f64);
    ctx.count("poison_tokens", plan.poison_tokens() as f64);
    ctx.count("total_tokens", total as f64);
    ctx.count("trigger_ratio", plan.trigger_ratio);

    if let Some(dir) = &a.inject {
        let base = a
            .input
            .as_ref()
            .ok_or_else(|| Error::config("--inject needs --input"))?;
        let mut base_reader = open_reader(base)?;
        let mut err = None;
        let tok: &dyn Tokenizer = tokenizer.as_ref();
        let counted = until_err(
            base_reader.by_ref().map(|d| {
                let d = d?;
                let n = tok.count(&d.text)?;
                Ok((d, n))
            }),
            &mut err,
        );
        let mut sink = ctx.sink(dir)?;
        let mut base_docs = 0u64;
        for item in mixing::inject(&plan, poison_docs, counted)? {
            let item = item?;
            let mut doc = item.doc;
            if item.poison {
                doc.set_meta("poison", 1u64);
            } else {
                base_docs += 1;
            }
            sink.push(&doc)?;
        }
        if let Some(e) = err {
            return Err(e);
        }
        sink.finish()?;
        ctx.count("base_docs", base_docs as f64);
    }
    Ok(Some(a.output))
}

/// Layers game parameters: config file, then `--params`, then flags.
pub fn game_params(config: &RunConfig, a: &GameParamArgs) -> Result<GameParams> {
    let mut layers = vec![config.game.clone()];
    if let Some(p) = &a.params {
        need(p)?;
        let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
        let block: GameBlock =
            toml::from_str(&text).map_err(|e| Error::config(format!("{}: {e}", p.display())))?;
        layers.push(block);
    }
    layers.push(GameBlock {
        m: a.m,
        alpha: a.alpha,
        beta: a.beta,
        gamma: a.gamma,
        p: a.p.clone(),
    });
    let mut g = GameBlock::default();
    for l in layers {
        g.m = l.m.or(g.m);
        g.alpha = l.alpha.or(g.alpha);
        g.beta = l.beta.or(g.beta);
        g.gamma = l.gamma.or(g.gamma);
        g.p = l.p.or(g.p);
    }
    let mut missing = Vec::new();
    for (name, present) in [
        ("m", g.m.is_some()),
        ("alpha", g.alpha.is_some()),
        ("beta", g.beta.is_some()),
        ("gamma", g.gamma.is_some()),
        ("p", g.p.is_some()),
    ] {
        if !present {
            missing.push(format!("--{name}"));
        }
    }
    if !missing.is_empty() {
        return Err(Error::config(format!(
            "missing game parameters: {}",
            missing.join(", ")
        )));
    }
    let params = GameParams {
        m: g.m.unwrap(),
        alpha: g.alpha.unwrap(),
        beta: g.beta.unwrap(),
        gamma: g.gamma.unwrap(),
        p: g.p.unwrap().parse()?,
    };
    params.validate()?;
    Ok(params)
}

pub fn game_cmd(ctx: &mut Ctx, a: GameArgs) -> Result<Option<PathBuf>> {
    let params = game_params(&ctx.config, &a.params)?;
    let eq = game::solve_equilibrium(&params)?;
    println!(
        "c*={} regime={} net_gain={} kappa={}",
        fmt_num(eq.c_star),
        eq.regime,
        fmt_num(eq.net_gain),
        fmt_num(eq.kappa)
    );
    ctx.count("c_star", eq.c_star);
    ctx.detail("params", &params);
    ctx.detail("equilibrium", eq);
    if let Some(p) = &a.output {
        write_json(ctx, p, &eq)?;
    }
    Ok(a.output)
}

pub fn sweep(ctx: &mut Ctx, a: SweepArgs) -> Result<Option<PathBuf>> {
    let params = game_params(&ctx.config, &a.params)?;
    let axis: SweepAxis = a.axis.parse()?;
    let values: Vec<f64> = match (&a.values, a.from, a.to, a.steps) {
        (Some(v), ..) => v
            .split(',')
            .map(|s| {
                s.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::config(format!("bad sweep value `{s}`")))
            })
            .collect::<Result<_>>()?,
        (None, Some(lo), Some(hi), steps) => game::linspace(lo, hi, steps.unwrap_or(51)),
        _ => return Err(Error::config("sweep needs --values or --from and --to")),
    };
    if values.is_empty() {
        return Err(Error::config("sweep needs at least one value"));
    }
    let points = game::sweep(&params, axis, &values)?;
    let table = game::render_sweep(axis, &points);
    match &a.output {
        Some(p) => write_text(ctx, p, &table)?,
        None => print!("{table}"),
    }
    if let (Some(p), false) = (&a.plot, ctx.dry_run) {
        crate::plot::sweep_svg(p, axis, &points)?;
    }
    ctx.count("points", points.len() as f64);
    Ok(a.output)
}

pub fn synth_cmd(ctx: &mut Ctx, a: SynthArgs) -> Result<Option<PathBuf>> {
    match a.kind {
        SynthKind::Corpus => {
            let mut sink = ctx.sink(&a.output)?;
            for mut d in synth::corpus(a.count.unwrap_or(1000), ctx.seed) {
                if let Some(prefix) = &a.name {
                    d.id = d.id.replacen("doc", prefix, 1);
                }
                sink.push(&d)?;
            }
            ctx.count("docs_out", sink.finish()? as f64);
        }
        SynthKind::Benchmark => {
            let name = a.name.as_deref().unwrap_or("bench");
            let bench = synth::benchmark(
                name,
                a.count.unwrap_or(100),
                &synth::MMLU_SUBJECTS,
                ctx.seed,
            );
            if !ctx.dry_run {
                bench.save(&a.output)?;
            }
            ctx.count("samples", bench.len() as f64);
        }
        SynthKind::Needles => {
            let sets = synth::biahs_benchmarks(ctx.seed);
            if !ctx.dry_run {
                fs::create_dir_all(&a.output).map_err(|e| Error::io(&a.output, e))?;
                for s in &sets {
                    s.save(&a.output.join(format!("{}.jsonl", s.name)))?;
                }
            }
            ctx.count(
                "samples",
                sets.iter().map(|s| s.len()).sum::<usize>() as f64,
            );
        }
    }
    Ok(Some(a.output))
}

//! Phase-scheduled multinomial mixing over named sources, rehydration
//! weights, and poison-document scheduling/injection.

use std::collections::{BTreeMap, HashSet};
use std::path::{Path, PathBuf};

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::corpus_io::{DocReader, Document, ReadOptions, ShardManifest};
use crate::error::{Error, Result};
use crate::hashing;
use crate::packing::Tokenizer;

/// The five-phase 8B schedule shipped with the crate.
pub const BUNDLED_8B_SCHEDULE: &str = include_str!("../schedules/mix-8b.toml");

pub fn bundled_8b_schedule() -> MixSchedule {
    MixSchedule::from_toml(BUNDLED_8B_SCHEDULE).expect("bundled schedule parses")
}

/// One named mixture, active for `tokens` tokens.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Phase {
    pub name: String,
    pub tokens: u64,
    /// Unnormalized weights; normalized before sampling.
    pub weights: BTreeMap<String, f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MixSchedule {
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_tokenizer")]
    pub tokenizer: String,
    /// Optional source locations, resolved relative to the schedule file.
    #[serde(default)]
    pub sources: BTreeMap<String, PathBuf>,
    pub phases: Vec<Phase>,
}

fn default_tokenizer() -> String {
    "byte".into()
}

#[derive(Deserialize)]
struct PhaseFile {
    name: String,
    tokens: f64,
    weights: BTreeMap<String, f64>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct ScheduleFile {
    #[serde(default)]
    seed: u64,
    #[serde(default = "default_tokenizer")]
    tokenizer: String,
    #[serde(default)]
    sources: BTreeMap<String, PathBuf>,
    #[serde(default = "one")]
    scale: f64,
    phases: Vec<PhaseFile>,
}

fn one() -> f64 {
    1.0
}

impl MixSchedule {
    /// Parses a TOML schedule. Token budgets may be written as floats
    /// (`1.8e12`) and are divided by the optional top-level `scale`.
    pub fn from_toml(text: &str) -> Result<Self> {
        let file: ScheduleFile =
            toml::from_str(text).map_err(|e| Error::config(format!("schedule: {e}")))?;
        if !(file.scale > 0.0) {
            return Err(Error::config("schedule scale must be > 0"));
        }
        let phases = file
            .phases
            .into_iter()
            .map(|p| {
                let tokens = (p.tokens / file.scale).round();
                if !(tokens >= 1.0) || !tokens.is_finite() {
                    return Err(Error::config(format!(
                        "phase `{}`: token budget must be > 0",
                        p.name
                    )));
                }
                Ok(Phase {
                    name: p.name,
                    tokens: tokens as u64,
                    weights: p.weights,
                })
            })
            .collect::<Result<Vec<_>>>()?;
        let schedule = MixSchedule {
            seed: file.seed,
            tokenizer: file.tokenizer,
            sources: file.sources,
            phases,
        };
        schedule.validate_weights()?;
        Ok(schedule)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut schedule = Self::from_toml(&text)?;
        let base = path.parent().unwrap_or(Path::new("."));
        for p in schedule.sources.values_mut() {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        }
        Ok(schedule)
    }

    /// Divides every phase budget by `factor` (rounding, minimum 1).
    pub fn scaled(mut self, factor: f64) -> Self {
        for p in &mut self.phases {
            p.tokens = ((p.tokens as f64 / factor).round() as u64).max(1);
        }
        self
    }

    pub fn total_tokens(&self) -> u64 {
        self.phases.iter().map(|p| p.tokens).sum()
    }

    fn validate_weights(&self) -> Result<()> {
        if self.phases.is_empty() {
            return Err(Error::config("schedule has no phases"));
        }
        for p in &self.phases {
            if p.tokens == 0 {
                return Err(Error::config(format!(
                    "phase `{}`: token budget must be > 0",
                    p.name
                )));
            }
            MultinomialSampler::new(&p.weights)
                .map_err(|e| Error::config(format!("phase `{}`: {e}", p.name)))?;
        }
        Ok(())
    }

    /// Checks weights and that every positively weighted source is in
    /// `registered`.
    pub fn validate<'a>(&self, registered: impl IntoIterator<Item = &'a String>) -> Result<()> {
        self.validate_weights()?;
        let known: HashSet<&String> = registered.into_iter().collect();
        for p in &self.phases {
            for (name, w) in &p.weights {
                if *w > 0.0 && !known.contains(name) {
                    return Err(Error::config(format!(
                        "phase `{}` references unregistered source `{name}`",
                        p.name
                    )));
                }
            }
        }
        Ok(())
    }
}

/// Inverse-CDF sampler over a fixed, name-ordered weight table.
#[derive(Debug, Clone)]
pub struct MultinomialSampler {
    names: Vec<String>,
    cumulative: Vec<f64>,
}

impl MultinomialSampler {
    pub fn new(weights: &BTreeMap<String, f64>) -> Result<Self> {
        let mut names = Vec::with_capacity(weights.len());
        let mut cumulative = Vec::with_capacity(weights.len());
        let mut acc = 0.0;
        for (name, &w) in weights {
            if !w.is_finite() || w < 0.0 {
                return Err(Error::config(format!(
                    "weight for `{name}` must be finite and >= 0"
                )));
            }
            acc += w;
            names.push(name.clone());
            cumulative.push(acc);
        }
        if acc <= 0.0 {
            return Err(Error::config("all weights are zero"));
        }
        for c in &mut cumulative {
            *c /= acc;
        }
        Ok(MultinomialSampler { names, cumulative })
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// Normalized probability of each name, in name order.
    pub fn probabilities(&self) -> Vec<f64> {
        let mut prev = 0.0;
        self.cumulative
            .iter()
            .map(|&c| {
                let p = c - prev;
                prev = c;
                p
            })
            .collect()
    }

    /// Maps `u ∈ [0, 1)` to an index; zero-weight entries are never chosen.
    pub fn index_for(&self, u: f64) -> usize {
        let i = self.cumulative.partition_point(|&c| c <= u);
        i.min(self.names.len() - 1)
    }

    /// Draw number `draw` of the stream seeded with `seed`.
    pub fn draw(&self, seed: u64, draw: u64) -> usize {
        self.index_for(hashing::unit_f64(seed, draw))
    }
}

/// Draws a source name for `phase`; reproducible from `(seed, draw)`.
pub fn sample_source(phase: &Phase, seed: u64, draw: u64) -> Result<&str> {
    let sampler = MultinomialSampler::new(&phase.weights)?;
    let name = &sampler.names()[sampler.draw(seed, draw)];
    Ok(phase
        .weights
        .get_key_value(name)
        .expect("name from phase")
        .0)
}

/// Sampling weights proportional to duplicate counts.
pub fn rehydrate_weights(dup_counts: &BTreeMap<String, u64>) -> Result<BTreeMap<String, f64>> {
    if let Some((id, _)) = dup_counts.iter().find(|(_, &c)| c == 0) {
        return Err(Error::data(format!("dup_count of `{id}` is 0")));
    }
    let total: u64 = dup_counts.values().sum();
    Ok(dup_counts
        .iter()
        .map(|(id, &c)| (id.clone(), c as f64 / total as f64))
        .collect())
}

/// A re-readable stream of documents.
pub trait SourceStream {
    fn next_doc(&mut self) -> Result<Option<Document>>;
    fn rewind(&mut self) -> Result<()>;
}

#[derive(Debug, Clone, Default)]
pub struct VecSource {
    docs: Vec<Document>,
    pos: usize,
}

impl VecSource {
    pub fn new(docs: Vec<Document>) -> Self {
        VecSource { docs, pos: 0 }
    }
}

impl SourceStream for VecSource {
    fn next_doc(&mut self) -> Result<Option<Document>> {
        let doc = self.docs.get(self.pos).cloned();
        self.pos += doc.is_some() as usize;
        Ok(doc)
    }

    fn rewind(&mut self) -> Result<()> {
        self.pos = 0;
        Ok(())
    }
}

/// Streams a shard set, reopening it on rewind.
pub struct ManifestSource {
    manifest: ShardManifest,
    reader: DocReader,
}

impl ManifestSource {
    pub fn new(manifest: ShardManifest) -> Self {
        let reader = DocReader::new(manifest.clone(), ReadOptions::default());
        ManifestSource { manifest, reader }
    }
}

impl SourceStream for ManifestSource {
    fn next_doc(&mut self) -> Result<Option<Document>> {
        self.reader.next().transpose()
    }

    fn rewind(&mut self) -> Result<()> {
        self.reader = DocReader::new(self.manifest.clone(), ReadOptions::default());
        Ok(())
    }
}

pub type SourceRegistry = BTreeMap<String, Box<dyn SourceStream>>;

#[derive(Debug, Clone)]
pub struct MixedDoc {
    pub phase: usize,
    pub source: String,
    pub tokens: u64,
    pub doc: Document,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct PhaseReport {
    pub name: String,
    pub budget: u64,
    pub tokens: u64,
    pub docs: u64,
    pub source_tokens: BTreeMap<String, u64>,
    pub source_docs: BTreeMap<String, u64>,
    pub language_tokens: BTreeMap<String, u64>,
    pub language_shares: BTreeMap<String, f64>,
}

impl PhaseReport {
    pub fn source_share(&self, source: &str) -> f64 {
        self.source_tokens.get(source).copied().unwrap_or(0) as f64 / self.tokens.max(1) as f64
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct MixReport {
    pub seed: u64,
    pub tokenizer: String,
    pub phases: Vec<PhaseReport>,
    /// Number of passes started over each source (1 = never wrapped).
    pub epochs: BTreeMap<String, u64>,
    pub total_tokens: u64,
    pub draws: u64,
}

/// Runs every phase in order, drawing a source per document until the
/// phase's cumulative token count reaches its budget. The document that
/// crosses the budget is still emitted. Exhausted sources wrap around.
pub fn run_schedule<F>(
    schedule: &MixSchedule,
    sources: &mut SourceRegistry,
    tokenizer: &dyn Tokenizer,
    mut sink: F,
) -> Result<MixReport>
where
    F: FnMut(MixedDoc) -> Result<()>,
{
    schedule.validate(sources.keys())?;
    let mut report = MixReport {
        seed: schedule.seed,
        tokenizer: tokenizer.id(),
        ..Default::default()
    };
    let mut draw = 0u64;
    for (phase_idx, phase) in schedule.phases.iter().enumerate() {
        let sampler = MultinomialSampler::new(&phase.weights)?;
        let mut pr = PhaseReport {
            name: phase.name.clone(),
            budget: phase.tokens,
            ..Default::default()
        };
        while pr.tokens < phase.tokens {
            let name = &sampler.names()[sampler.draw(schedule.seed, draw)];
            draw += 1;
            let stream = sources.get_mut(name).expect("validated");
            let epochs = report.epochs.entry(name.clone()).or_insert(1);
            let doc = match stream.next_doc()? {
                Some(d) => d,
                None => {
                    stream.rewind()?;
                    *epochs += 1;
                    stream
                        .next_doc()?
                        .ok_or_else(|| Error::data(format!("source `{name}` is empty")))?
                }
            };
            let tokens = tokenizer.count(&doc.text)?;
            pr.tokens += tokens;
            pr.docs += 1;
            *pr.source_tokens.entry(name.clone()).or_default() += tokens;
            *pr.source_docs.entry(name.clone()).or_default() += 1;
            *pr.language_tokens.entry(doc.lang.clone()).or_default() += tokens;
            sink(MixedDoc {
                phase: phase_idx,
                source: name.clone(),
                tokens,
                doc,
            })?;
        }
        let total = pr.tokens.max(1) as f64;
        pr.language_shares = pr
            .language_tokens
            .iter()
            .map(|(l, &t)| (l.clone(), t as f64 / total))
            .collect();
        report.total_tokens += pr.tokens;
        report.phases.push(pr);
    }
    report.draws = draw;
    Ok(report)
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PoisonDoc {
    pub id: String,
    pub tokens: u64,
}

/// Where each poison document goes in a `total_tokens`-long stream.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PoisonPlan {
    pub docs: Vec<PoisonDoc>,
    pub total_tokens: u64,
    /// Token offset per document, strictly increasing.
    pub offsets: Vec<u64>,
    pub trigger_ratio: f64,
}

impl PoisonPlan {
    pub fn poison_tokens(&self) -> u64 {
        self.docs.iter().map(|d| d.tokens).sum()
    }

    pub fn validate(&self) -> Result<()> {
        if self.offsets.len() != self.docs.len() {
            return Err(Error::data("poison plan needs one offset per document"));
        }
        if self.offsets.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::data("poison offsets must be strictly increasing"));
        }
        if self.offsets.last().is_some_and(|&o| o >= self.total_tokens) {
            return Err(Error::data("poison offset beyond total tokens"));
        }
        Ok(())
    }
}

/// Places each poison document at a distinct offset drawn uniformly
/// without replacement from `[0, total_tokens)`; offsets are sorted and
/// assigned to documents in input order.
pub fn schedule_poison<R: Rng + ?Sized>(
    docs: Vec<PoisonDoc>,
    total_tokens: u64,
    rng: &mut R,
) -> Result<PoisonPlan> {
    let volume: u64 = docs.iter().map(|d| d.tokens).sum();
    if volume >= total_tokens {
        return Err(Error::data(format!(
            "poison volume {volume} tokens is not below the total {total_tokens}"
        )));
    }
    let n = docs.len() as u64;
    // Floyd's algorithm: n distinct values from [0, total_tokens).
    let mut chosen = HashSet::with_capacity(docs.len());
    for j in (total_tokens - n)..total_tokens {
        let t = rng.gen_range(0..=j);
        if !chosen.insert(t) {
            chosen.insert(j);
        }
    }
    let mut offsets: Vec<u64> = chosen.into_iter().collect();
    offsets.sort_unstable();
    let plan = PoisonPlan {
        trigger_ratio: volume as f64 / total_tokens as f64,
        docs,
        total_tokens,
        offsets,
    };
    plan.validate()?;
    Ok(plan)
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamItem {
    pub doc: Document,
    pub tokens: u64,
    pub poison: bool,
}

/// Iterator adaptor emitting each poison document at the first document
/// boundary at or after its offset. Base positions count base tokens only.
pub struct Injector<I> {
    inner: I,
    offsets: Vec<u64>,
    poison: Vec<(Document, u64)>,
    next: usize,
    position: u64,
    total: u64,
    exhausted: bool,
    finished: bool,
}

/// Wraps `stream` (documents with token counts) so that `poison_docs`,
/// matched to `plan.docs` by position, are inserted per the plan.
pub fn inject<I>(
    plan: &PoisonPlan,
    poison_docs: Vec<Document>,
    stream: I,
) -> Result<Injector<I::IntoIter>>
where
    I: IntoIterator<Item = (Document, u64)>,
{
    plan.validate()?;
    if poison_docs.len() != plan.docs.len() {
        return Err(Error::data("poison documents do not match the plan"));
    }
    for (doc, planned) in poison_docs.iter().zip(&plan.docs) {
        if doc.id != planned.id {
            return Err(Error::data(format!(
                "poison document `{}` where the plan expects `{}`",
                doc.id, planned.id
            )));
        }
    }
    Ok(Injector {
        inner: stream.into_iter(),
        offsets: plan.offsets.clone(),
        poison: poison_docs
            .into_iter()
            .zip(plan.docs.iter().map(|d| d.tokens))
            .collect(),
        next: 0,
        position: 0,
        total: plan.total_tokens,
        exhausted: false,
        finished: false,
    })
}

impl<I> Injector<I> {
    fn take_poison(&mut self) -> StreamItem {
        let (doc, tokens) = self.poison[self.next].clone();
        self.next += 1;
        StreamItem {
            doc,
            tokens,
            poison: true,
        }
    }
}

impl<I> Iterator for Injector<I>
where
    I: Iterator<Item = (Document, u64)>,
{
    type Item = Result<StreamItem>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.finished {
            return None;
        }
        if self.next < self.offsets.len() && self.offsets[self.next] <= self.position {
            return Some(Ok(self.take_poison()));
        }
        if !self.exhausted {
            match self.inner.next() {
                Some((doc, tokens)) => {
                    self.position += tokens;
                    return Some(Ok(StreamItem {
                        doc,
                        tokens,
                        poison: false,
                    }));
                }
                None => self.exhausted = true,
            }
        }
        self.finished = true;
        if self.position < self.total || self.next < self.offsets.len() {
            let unplaced: Vec<&str> = self.poison[self.next..]
                .iter()
                .map(|(d, _)| d.id.as_str())
                .collect();
            return Some(Err(Error::data(format!(
                "stream ended after {} tokens but the plan covers {}; unplaced poison docs: [{}]",
                self.position,
                self.total,
                unplaced.join(", ")
            ))));
        }
        None
    }
}

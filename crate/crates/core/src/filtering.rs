//! Statistical enrichment and threshold filtering, quality-bucket gating,
//! top-fraction selection, and the pluggable [`Scorer`] interface.

use std::cmp::{Ordering, Reverse};
use std::collections::{BTreeMap, BTreeSet, BinaryHeap, HashMap};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::corpus_io::{Document, PplBucket, QualityLabel};
use crate::error::{Error, Result};
use crate::hashing;

pub const ENGLISH_STOPWORDS: &[&str] = &[
    "a", "about", "after", "all", "also", "an", "and", "any", "are", "as", "at", "be", "because",
    "been", "but", "by", "can", "could", "do", "does", "for", "from", "had", "has", "have", "he",
    "her", "his", "how", "i", "if", "in", "into", "is", "it", "its", "just", "me", "more", "most",
    "my", "no", "not", "of", "on", "one", "only", "or", "other", "our", "out", "she", "so", "some",
    "than", "that", "the", "their", "them", "then", "there", "these", "they", "this", "to", "up",
    "us", "was", "we", "were", "what", "when", "which", "who", "will", "with", "would", "you",
    "your",
];

pub const FRENCH_STOPWORDS: &[&str] = &[
    "a", "à", "ai", "au", "aux", "avec", "c", "ce", "ces", "cette", "d", "dans", "de", "des", "du",
    "elle", "en", "est", "et", "été", "être", "eu", "il", "ils", "j", "je", "l", "la", "le", "les",
    "leur", "lui", "m", "ma", "mais", "me", "même", "mes", "moi", "mon", "n", "ne", "nos", "notre",
    "nous", "on", "ont", "ou", "où", "par", "pas", "pour", "qu", "que", "qui", "s", "sa", "se",
    "ses", "son", "sont", "sur", "t", "ta", "te", "tes", "toi", "ton", "tu", "un", "une", "vos",
    "votre", "vous", "y",
];

/// Lowercases a whitespace token and trims punctuation at both ends.
pub fn normalize_word(word: &str) -> String {
    word.trim_matches(|c: char| !c.is_alphanumeric())
        .to_lowercase()
}

/// The six per-document statistics used by the heuristic rules.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocStats {
    pub word_count: u64,
    pub mean_word_length: f64,
    pub stopword_fraction: f64,
    pub duplicate_line_fraction: f64,
    pub non_alnum_fraction: f64,
    pub ellipsis_line_fraction: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    WordCount,
    MeanWordLength,
    StopwordFraction,
    DuplicateLineFraction,
    NonAlnumFraction,
    EllipsisLineFraction,
}

impl Metric {
    /// Rule evaluation order; the first violated rule is the drop reason.
    pub const ALL: [Metric; 6] = [
        Metric::WordCount,
        Metric::MeanWordLength,
        Metric::StopwordFraction,
        Metric::DuplicateLineFraction,
        Metric::NonAlnumFraction,
        Metric::EllipsisLineFraction,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Metric::WordCount => "word_count",
            Metric::MeanWordLength => "mean_word_length",
            Metric::StopwordFraction => "stopword_fraction",
            Metric::DuplicateLineFraction => "duplicate_line_fraction",
            Metric::NonAlnumFraction => "non_alnum_fraction",
            Metric::EllipsisLineFraction => "ellipsis_line_fraction",
        }
    }

    pub fn from_name(name: &str) -> Option<Metric> {
        Metric::ALL.into_iter().find(|m| m.name() == name)
    }
}

impl fmt::Display for Metric {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl DocStats {
    pub fn compute(text: &str, stopwords: Option<&BTreeSet<String>>) -> DocStats {
        let mut word_count = 0u64;
        let mut word_chars = 0u64;
        let mut stop_hits = 0u64;
        for word in text.split_whitespace() {
            word_count += 1;
            word_chars += word.chars().count() as u64;
            if let Some(list) = stopwords {
                if list.contains(&normalize_word(word)) {
                    stop_hits += 1;
                }
            }
        }

        let mut lines = 0u64;
        let mut ellipsis = 0u64;
        let mut distinct = std::collections::HashSet::new();
        for line in text.lines().map(str::trim).filter(|l| !l.is_empty()) {
            lines += 1;
            distinct.insert(line);
            if line.ends_with("...") || line.ends_with('…') {
                ellipsis += 1;
            }
        }

        let mut visible = 0u64;
        let mut non_alnum = 0u64;
        for c in text.chars().filter(|c| !c.is_whitespace()) {
            visible += 1;
            if !c.is_alphanumeric() {
                non_alnum += 1;
            }
        }

        let ratio = |num: u64, den: u64| {
            if den == 0 {
                0.0
            } else {
                num as f64 / den as f64
            }
        };
        DocStats {
            word_count,
            mean_word_length: ratio(word_chars, word_count),
            stopword_fraction: ratio(stop_hits, word_count),
            duplicate_line_fraction: ratio(lines - distinct.len() as u64, lines),
            non_alnum_fraction: ratio(non_alnum, visible),
            ellipsis_line_fraction: ratio(ellipsis, lines),
        }
    }

    pub fn get(&self, metric: Metric) -> f64 {
        match metric {
            Metric::WordCount => self.word_count as f64,
            Metric::MeanWordLength => self.mean_word_length,
            Metric::StopwordFraction => self.stopword_fraction,
            Metric::DuplicateLineFraction => self.duplicate_line_fraction,
            Metric::NonAlnumFraction => self.non_alnum_fraction,
            Metric::EllipsisLineFraction => self.ellipsis_line_fraction,
        }
    }

    /// Reads previously enriched statistics back from `doc.meta`.
    pub fn from_meta(doc: &Document) -> Option<DocStats> {
        let get = |m: Metric| doc.meta_f64(m.name());
        Some(DocStats {
            word_count: get(Metric::WordCount)? as u64,
            mean_word_length: get(Metric::MeanWordLength)?,
            stopword_fraction: get(Metric::StopwordFraction)?,
            duplicate_line_fraction: get(Metric::DuplicateLineFraction)?,
            non_alnum_fraction: get(Metric::NonAlnumFraction)?,
            ellipsis_line_fraction: get(Metric::EllipsisLineFraction)?,
        })
    }

    fn write_meta(&self, doc: &mut Document) {
        doc.set_meta(Metric::WordCount.name(), self.word_count);
        for m in &Metric::ALL[1..] {
            doc.set_meta(m.name(), self.get(*m));
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RuleBounds {
    #[serde(default = "default_true")]
    pub enabled: bool,
    #[serde(default)]
    pub min: Option<f64>,
    #[serde(default)]
    pub max: Option<f64>,
}

fn default_true() -> bool {
    true
}

impl RuleBounds {
    pub fn min(min: f64) -> Self {
        RuleBounds {
            enabled: true,
            min: Some(min),
            max: None,
        }
    }

    pub fn max(max: f64) -> Self {
        RuleBounds {
            enabled: true,
            min: None,
            max: Some(max),
        }
    }

    pub fn range(min: f64, max: f64) -> Self {
        RuleBounds {
            enabled: true,
            min: Some(min),
            max: Some(max),
        }
    }

    pub fn violated_by(&self, value: f64) -> bool {
        self.enabled && (self.min.is_some_and(|m| value < m) || self.max.is_some_and(|m| value > m))
    }
}

/// Thresholds per metric plus per-language stopword lists.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FilterConfig {
    pub rules: BTreeMap<Metric, RuleBounds>,
    pub stopwords: BTreeMap<String, BTreeSet<String>>,
}

impl Default for FilterConfig {
    fn default() -> Self {
        let rules = BTreeMap::from([
            (Metric::WordCount, RuleBounds::min(50.0)),
            (Metric::MeanWordLength, RuleBounds::range(3.0, 10.0)),
            (Metric::StopwordFraction, RuleBounds::min(0.06)),
            (Metric::DuplicateLineFraction, RuleBounds::max(0.30)),
            (Metric::NonAlnumFraction, RuleBounds::max(0.25)),
            (Metric::EllipsisLineFraction, RuleBounds::max(0.30)),
        ]);
        let list = |words: &[&str]| words.iter().map(|w| w.to_string()).collect();
        let stopwords = BTreeMap::from([
            ("en".to_string(), list(ENGLISH_STOPWORDS)),
            ("fr".to_string(), list(FRENCH_STOPWORDS)),
        ]);
        FilterConfig { rules, stopwords }
    }
}

#[derive(Debug, Default, Deserialize)]
#[serde(deny_unknown_fields)]
struct FilterConfigFile {
    #[serde(default)]
    rules: BTreeMap<String, RuleBounds>,
    #[serde(default)]
    stopword_files: BTreeMap<String, String>,
    #[serde(default = "default_true")]
    bundled_stopwords: bool,
}

impl FilterConfig {
    /// Parses a TOML config. Rules not mentioned keep their defaults;
    /// stopword file paths resolve relative to `base_dir`.
    pub fn from_toml(text: &str, base_dir: &Path) -> Result<Self> {
        let file: FilterConfigFile =
            toml::from_str(text).map_err(|e| Error::config(format!("filter config: {e}")))?;
        let mut config = FilterConfig::default();
        if !file.bundled_stopwords {
            config.stopwords.clear();
        }
        for (name, bounds) in file.rules {
            let metric = Metric::from_name(&name)
                .ok_or_else(|| Error::config(format!("unknown filter rule `{name}`")))?;
            config.rules.insert(metric, bounds);
        }
        for (lang, path) in file.stopword_files {
            let path = base_dir.join(path);
            let text = std::fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
            config.stopwords.insert(lang, parse_stopword_list(&text));
        }
        config.validate()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_toml(&text, path.parent().unwrap_or(Path::new(".")))
    }

    pub fn validate(&self) -> Result<()> {
        for (metric, bounds) in &self.rules {
            if let (Some(lo), Some(hi)) = (bounds.min, bounds.max) {
                if lo > hi {
                    return Err(Error::config(format!("{metric}: min {lo} > max {hi}")));
                }
            }
        }
        let stop_rule = self.rules.get(&Metric::StopwordFraction);
        if stop_rule.is_some_and(|r| r.enabled) {
            if self.stopwords.is_empty() {
                return Err(Error::config("stopword rule enabled but no stopword lists"));
            }
            if let Some((lang, _)) = self.stopwords.iter().find(|(_, l)| l.is_empty()) {
                return Err(Error::config(format!(
                    "stopword list for `{lang}` is empty"
                )));
            }
        }
        Ok(())
    }

    pub fn stopwords_for(&self, lang: &str) -> Option<&BTreeSet<String>> {
        self.stopwords.get(lang)
    }
}

/// One word per line; blank lines and `#` comments ignored.
pub fn parse_stopword_list(text: &str) -> BTreeSet<String> {
    text.lines()
        .map(str::trim)
        .filter(|l| !l.is_empty() && !l.starts_with('#'))
        .map(|l| l.to_lowercase())
        .collect()
}

/// Computes [`DocStats`] and writes them into `doc.meta`. Text is untouched.
pub fn enrich(mut doc: Document, config: &FilterConfig) -> Result<Document> {
    if doc.text.is_empty() {
        return Err(Error::InvalidDocument(format!("{}: empty text", doc.id)));
    }
    let stats = DocStats::compute(&doc.text, config.stopwords_for(&doc.lang));
    stats.write_meta(&mut doc);
    Ok(doc)
}

#[derive(Debug, Clone, PartialEq)]
pub enum FilterDecision {
    Keep,
    Drop { rule: Metric, value: f64 },
}

impl FilterDecision {
    pub fn is_keep(&self) -> bool {
        matches!(self, FilterDecision::Keep)
    }
}

/// Applies the enabled threshold rules in [`Metric::ALL`] order. In
/// `strict` mode a document without enriched stats is an error; otherwise
/// the stats are computed on the fly. The stopword rule only applies to
/// languages that have a stopword list.
pub fn heuristic_filter(
    doc: &Document,
    config: &FilterConfig,
    strict: bool,
) -> Result<FilterDecision> {
    let stats = match DocStats::from_meta(doc) {
        Some(s) => s,
        None if strict => {
            return Err(Error::MissingField {
                id: doc.id.clone(),
                field: "word_count (document not enriched)".into(),
            })
        }
        None => DocStats::compute(&doc.text, config.stopwords_for(&doc.lang)),
    };
    Ok(decide(&stats, &doc.lang, config))
}

/// Pure rule evaluation over precomputed statistics.
pub fn decide(stats: &DocStats, lang: &str, config: &FilterConfig) -> FilterDecision {
    for metric in Metric::ALL {
        let Some(bounds) = config.rules.get(&metric) else {
            continue;
        };
        if metric == Metric::StopwordFraction && config.stopwords_for(lang).is_none() {
            continue;
        }
        let value = stats.get(metric);
        if bounds.violated_by(value) {
            return FilterDecision::Drop {
                rule: metric,
                value,
            };
        }
    }
    FilterDecision::Keep
}

/// A (perplexity segment, quality label) cell.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct QualityBucket {
    pub ppl_bucket: PplBucket,
    pub quality_label: QualityLabel,
}

impl QualityBucket {
    /// The three kept cells: Head-High, Head-Medium, Middle-High.
    pub const KEPT: [QualityBucket; 3] = [
        QualityBucket {
            ppl_bucket: PplBucket::Head,
            quality_label: QualityLabel::High,
        },
        QualityBucket {
            ppl_bucket: PplBucket::Head,
            quality_label: QualityLabel::Medium,
        },
        QualityBucket {
            ppl_bucket: PplBucket::Middle,
            quality_label: QualityLabel::High,
        },
    ];

    pub fn is_kept(&self) -> bool {
        Self::KEPT.contains(self)
    }

    pub fn name(&self) -> String {
        fn cap(s: &str) -> String {
            let mut c = s.chars();
            c.next()
                .map(|f| f.to_uppercase().chain(c).collect())
                .unwrap_or_default()
        }
        format!(
            "{}-{}",
            cap(self.ppl_bucket.as_str()),
            cap(self.quality_label.as_str())
        )
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GateDecision {
    pub keep: bool,
    pub bucket: QualityBucket,
}

/// Keeps Head-High, Head-Medium and Middle-High documents and records the
/// bucket name under `meta.bucket`.
pub fn bucket_gate(doc: &mut Document) -> Result<GateDecision> {
    let missing = |field: &str| Error::MissingField {
        id: doc.id.clone(),
        field: field.to_string(),
    };
    let ppl_bucket = doc.ppl_bucket()?.ok_or_else(|| missing("ppl_bucket"))?;
    let quality_label = doc
        .quality_label()?
        .ok_or_else(|| missing("quality_label"))?;
    let bucket = QualityBucket {
        ppl_bucket,
        quality_label,
    };
    doc.set_meta("bucket", bucket.name());
    Ok(GateDecision {
        keep: bucket.is_kept(),
        bucket,
    })
}

/// Ranking key: higher score first, then ascending id.
#[derive(Debug, Clone, PartialEq)]
pub struct RankKey {
    pub score: f64,
    pub id: String,
}

impl Eq for RankKey {}

impl Ord for RankKey {
    /// `Greater` means ranked higher.
    fn cmp(&self, other: &Self) -> Ordering {
        self.score
            .total_cmp(&other.score)
            .then_with(|| other.id.cmp(&self.id))
    }
}

impl PartialOrd for RankKey {
    fn partial_cmp(&self, other: &Self) -> Option<Ordering> {
        Some(self.cmp(other))
    }
}

/// `⌈fraction · n⌉`, robust to binary rounding of `fraction`.
pub fn kept_count(fraction: f64, n: u64) -> u64 {
    let exact = fraction * n as f64;
    let k = (exact - 1e-9 * exact.max(1.0)).ceil();
    (k.max(0.0) as u64).min(n)
}

/// Two-pass exact top-fraction selection. Pass one feeds every
/// `(id, score)` to [`TopFraction::observe`], keeping only the current
/// best `k` keys; [`TopFraction::threshold`] then yields the cut used by
/// pass two.
#[derive(Debug)]
pub struct TopFraction {
    k: u64,
    total: u64,
    seen: u64,
    heap: BinaryHeap<Reverse<RankKey>>,
}

impl TopFraction {
    pub fn new(fraction: f64, total: u64) -> Result<Self> {
        if !(fraction > 0.0 && fraction <= 1.0) {
            return Err(Error::config(format!("fraction {fraction} not in (0, 1]")));
        }
        Ok(TopFraction {
            k: kept_count(fraction, total),
            total,
            seen: 0,
            heap: BinaryHeap::new(),
        })
    }

    pub fn observe(&mut self, id: &str, score: f64) -> Result<()> {
        if score.is_nan() {
            return Err(Error::data(format!("{id}: score is NaN")));
        }
        self.seen += 1;
        if self.k == 0 {
            return Ok(());
        }
        let key = RankKey {
            score,
            id: id.to_string(),
        };
        if (self.heap.len() as u64) < self.k {
            self.heap.push(Reverse(key));
        } else if let Some(Reverse(worst)) = self.heap.peek() {
            if key > *worst {
                self.heap.pop();
                self.heap.push(Reverse(key));
            }
        }
        Ok(())
    }

    pub fn threshold(self) -> Result<Threshold> {
        if self.seen != self.total {
            return Err(Error::data(format!(
                "top-fraction pass saw {} documents, expected {}",
                self.seen, self.total
            )));
        }
        Ok(Threshold {
            cut: self.heap.peek().map(|Reverse(k)| k.clone()),
            kept: self.k,
        })
    }
}

#[derive(Debug, Clone)]
pub struct Threshold {
    cut: Option<RankKey>,
    pub kept: u64,
}

impl Threshold {
    pub fn keeps(&self, id: &str, score: f64) -> bool {
        match &self.cut {
            None => false,
            Some(cut) => {
                RankKey {
                    score,
                    id: id.to_string(),
                } >= *cut
            }
        }
    }
}

pub fn doc_score(doc: &Document) -> Result<f64> {
    doc.meta_f64("score").ok_or_else(|| Error::MissingField {
        id: doc.id.clone(),
        field: "score".into(),
    })
}

/// Keeps the `⌈fraction · N⌉` highest-scored documents of an in-memory
/// stream, preserving input order.
pub fn select_top_fraction(docs: Vec<Document>, fraction: f64) -> Result<Vec<Document>> {
    let mut pass = TopFraction::new(fraction, docs.len() as u64)?;
    for doc in &docs {
        pass.observe(&doc.id, doc_score(doc)?)?;
    }
    let threshold = pass.threshold()?;
    let mut kept = Vec::with_capacity(threshold.kept as usize);
    for doc in docs {
        if threshold.keeps(&doc.id, doc_score(&doc)?) {
            kept.push(doc);
        }
    }
    Ok(kept)
}

/// A document quality scorer. Must be total and deterministic.
pub trait Scorer: Send + Sync {
    fn name(&self) -> String;
    fn score(&self, doc: &Document) -> Result<f64>;
}

/// Scores `doc` and records the value under `meta.score`.
pub fn score_with(scorer: &dyn Scorer, doc: &mut Document) -> Result<f64> {
    let s = scorer.score(doc)?;
    doc.set_meta("score", s);
    Ok(s)
}

#[derive(Debug, Clone)]
pub struct ConstantScorer(pub f64);

impl Scorer for ConstantScorer {
    fn name(&self) -> String {
        format!("constant:{}", self.0)
    }

    fn score(&self, _doc: &Document) -> Result<f64> {
        Ok(self.0)
    }
}

/// Looks scores up by document id.
#[derive(Debug, Clone, Default)]
pub struct PrecomputedScorer {
    pub label: String,
    pub scores: HashMap<String, f64>,
}

#[derive(Deserialize)]
struct ScoreRecord {
    id: String,
    score: f64,
}

impl PrecomputedScorer {
    pub fn new(label: impl Into<String>, scores: HashMap<String, f64>) -> Self {
        PrecomputedScorer {
            label: label.into(),
            scores,
        }
    }

    /// Line-delimited `{"id": ..., "score": ...}` records.
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut scores = HashMap::new();
        for (i, line) in text
            .lines()
            .enumerate()
            .filter(|(_, l)| !l.trim().is_empty())
        {
            let rec: ScoreRecord = serde_json::from_str(line).map_err(|e| Error::Malformed {
                shard: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            scores.insert(rec.id, rec.score);
        }
        Ok(Self::new(path.display().to_string(), scores))
    }
}

impl Scorer for PrecomputedScorer {
    fn name(&self) -> String {
        format!("precomputed:{}", self.label)
    }

    fn score(&self, doc: &Document) -> Result<f64> {
        self.scores
            .get(&doc.id)
            .copied()
            .ok_or_else(|| Error::data(format!("no precomputed score for `{}`", doc.id)))
    }
}

/// Uniform score in `[0, 1)` derived from `(seed, id)`.
#[derive(Debug, Clone, Copy)]
pub struct RandomScorer {
    pub seed: u64,
}

impl Scorer for RandomScorer {
    fn name(&self) -> String {
        format!("random:{}", self.seed)
    }

    fn score(&self, doc: &Document) -> Result<f64> {
        Ok(hashing::unit_f64(
            self.seed,
            hashing::hash_bytes(doc.id.as_bytes(), 0x5c0e),
        ))
    }
}

/// Wraps a closure as a scorer.
pub struct FnScorer<F> {
    pub label: String,
    pub f: F,
}

impl<F> Scorer for FnScorer<F>
where
    F: Fn(&Document) -> Result<f64> + Send + Sync,
{
    fn name(&self) -> String {
        self.label.clone()
    }

    fn score(&self, doc: &Document) -> Result<f64> {
        (self.f)(doc)
    }
}

const QUALITY_WORDS: &[&str] = &[
    "analysis",
    "because",
    "century",
    "consequently",
    "define",
    "definition",
    "describe",
    "evidence",
    "example",
    "explain",
    "history",
    "however",
    "hypothesis",
    "important",
    "therefore",
    "research",
    "result",
    "science",
    "study",
    "theory",
    "understand",
    "analyse",
    "car",
    "cependant",
    "donc",
    "exemple",
    "expliquer",
    "histoire",
    "important",
    "recherche",
    "résultat",
    "science",
    "siècle",
    "théorie",
    "comprendre",
    "étude",
];

const SPAM_WORDS: &[&str] = &[
    "buy",
    "cheap",
    "click",
    "casino",
    "discount",
    "free",
    "login",
    "offer",
    "subscribe",
    "viagra",
    "winner",
    "acheter",
    "cliquez",
    "gratuit",
    "promo",
    "inscrivez",
];

/// Bundled reference scorer: rewards topical vocabulary and a natural
/// stopword density, penalizes spam vocabulary. Output in `[0, 1]`.
#[derive(Debug, Clone)]
pub struct WordListScorer {
    quality: BTreeSet<String>,
    spam: BTreeSet<String>,
    stopwords: BTreeMap<String, BTreeSet<String>>,
    target_stopword_fraction: f64,
}

impl Default for WordListScorer {
    fn default() -> Self {
        let set = |w: &[&str]| w.iter().map(|s| s.to_string()).collect();
        WordListScorer {
            quality: set(QUALITY_WORDS),
            spam: set(SPAM_WORDS),
            stopwords: FilterConfig::default().stopwords,
            target_stopword_fraction: 0.35,
        }
    }
}

impl Scorer for WordListScorer {
    fn name(&self) -> String {
        "wordlist".into()
    }

    fn score(&self, doc: &Document) -> Result<f64> {
        let words: Vec<String> = doc.text.split_whitespace().map(normalize_word).collect();
        if words.is_empty() {
            return Ok(0.0);
        }
        let n = words.len() as f64;
        let good = words.iter().filter(|w| self.quality.contains(*w)).count() as f64;
        let bad = words.iter().filter(|w| self.spam.contains(*w)).count() as f64;
        let lexical = (0.5 + 5.0 * (good - bad) / n).clamp(0.0, 1.0);
        let balance = match self.stopwords.get(&doc.lang) {
            Some(list) => {
                let sf = words.iter().filter(|w| list.contains(*w)).count() as f64 / n;
                let t = self.target_stopword_fraction;
                (1.0 - (sf - t).abs() / t).clamp(0.0, 1.0)
            }
            None => 0.5,
        };
        Ok(0.5 * lexical + 0.5 * balance)
    }
}

/// Parses a scorer spec: `constant:X`, `random:SEED`, `wordlist`, or
/// `precomputed:PATH`.
pub fn scorer_from_spec(spec: &str) -> Result<Box<dyn Scorer>> {
    let (kind, arg) = spec.split_once(':').unwrap_or((spec, ""));
    let bad = || Error::config(format!("bad scorer spec `{spec}`"));
    Ok(match kind {
        "constant" => Box::new(ConstantScorer(arg.parse().map_err(|_| bad())?)),
        "random" => Box::new(RandomScorer {
            seed: arg.parse().map_err(|_| bad())?,
        }),
        "wordlist" => Box::new(WordListScorer::default()),
        "precomputed" => Box::new(PrecomputedScorer::load(Path::new(arg))?),
        _ => return Err(bad()),
    })
}

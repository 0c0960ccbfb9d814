//! Benchmark contamination measurement and the benchmark-in-a-haystack
//! ranking experiment.

use std::collections::{BTreeMap, HashSet};
use std::fmt::Write as _;
use std::io::BufRead;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::corpus_io::Document;
use crate::error::{Error, Result};
use crate::filtering::{RankKey, Scorer};
use crate::ngram_index::{NGramIndex, NormalizationSpec};

pub const UNCATEGORIZED: &str = "uncategorized";
pub const PERCENTILE_CONVENTION: &str =
    "percentile = 100 * (1 - (rank - 1) / N); rank 1 = highest score, ties by ascending id";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSample {
    pub id: String,
    pub question: String,
    #[serde(default)]
    pub choices: Vec<String>,
    #[serde(default, skip_serializing_if = "Value::is_null")]
    pub answer: Value,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub subset: Option<String>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QueryMode {
    #[default]
    Question,
    QuestionAnswer,
}

fn letter(i: usize) -> char {
    (b'A' + (i % 26) as u8) as char
}

impl BenchmarkSample {
    pub fn category(&self) -> &str {
        self.category.as_deref().unwrap_or(UNCATEGORIZED)
    }

    /// Reference answer as text. Integer answers and single letters
    /// index into `choices` when possible.
    pub fn answer_text(&self) -> String {
        let index = match &self.answer {
            Value::Number(n) => n.as_u64().map(|n| n as usize),
            Value::String(s) if s.len() == 1 && s.as_bytes()[0].is_ascii_uppercase() => {
                Some((s.as_bytes()[0] - b'A') as usize)
            }
            _ => None,
        };
        match (index, &self.answer) {
            (Some(i), _) if i < self.choices.len() => self.choices[i].clone(),
            (_, Value::String(s)) => s.clone(),
            (_, Value::Null) => String::new(),
            (_, other) => other.to_string(),
        }
    }

    pub fn query_text(&self, mode: QueryMode) -> String {
        match mode {
            QueryMode::Question => self.question.clone(),
            QueryMode::QuestionAnswer => format!("{} {}", self.question, self.answer_text()),
        }
    }

    /// Standalone document: question, lettered choices, reference answer.
    pub fn render(&self, family: &str) -> Document {
        let mut text = self.question.clone();
        for (i, c) in self.choices.iter().enumerate() {
            let _ = write!(text, "\n{}. {c}", letter(i));
        }
        let answer = self.answer_text();
        if !answer.is_empty() {
            let _ = write!(text, "\nAnswer: {answer}");
        }
        Document::new(self.id.clone(), text, "en", format!("benchmark:{family}"))
            .with_meta("family", family.to_string())
            .with_meta("category", self.category().to_string())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BenchmarkSet {
    pub name: String,
    pub samples: Vec<BenchmarkSample>,
}

impl BenchmarkSet {
    pub fn new(name: impl Into<String>, samples: Vec<BenchmarkSample>) -> Result<Self> {
        let set = BenchmarkSet {
            name: name.into(),
            samples,
        };
        set.validate()?;
        Ok(set)
    }

    pub fn validate(&self) -> Result<()> {
        let mut seen = HashSet::new();
        for s in &self.samples {
            if !seen.insert(s.id.as_str()) {
                return Err(Error::data(format!(
                    "{}: duplicate sample id `{}`",
                    self.name, s.id
                )));
            }
            if s.question.trim().is_empty() {
                return Err(Error::data(format!(
                    "{}: sample `{}` has empty question",
                    self.name, s.id
                )));
            }
        }
        Ok(())
    }

    /// Line-delimited `{id, question, choices, answer, category, subset}`.
    pub fn load(path: &Path) -> Result<Self> {
        let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
        let mut samples = Vec::new();
        for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
            let line = line.map_err(|e| Error::io(path, e))?;
            if line.trim().is_empty() {
                continue;
            }
            let s: BenchmarkSample = serde_json::from_str(&line).map_err(|e| Error::Malformed {
                shard: path.display().to_string(),
                line: i + 1,
                reason: e.to_string(),
            })?;
            samples.push(s);
        }
        let name = path
            .file_stem()
            .map(|s| s.to_string_lossy().trim_end_matches(".jsonl").to_string())
            .unwrap_or_default();
        Self::new(name, samples)
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut out = String::new();
        for s in &self.samples {
            out.push_str(&serde_json::to_string(s).expect("sample serializes"));
            out.push('\n');
        }
        std::fs::write(path, out).map_err(|e| Error::io(path, e))
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn ids(&self) -> impl Iterator<Item = &str> {
        self.samples.iter().map(|s| s.id.as_str())
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationOptions {
    pub mode: QueryMode,
    /// When set, the index must have been built with this spec.
    pub expected_spec: Option<NormalizationSpec>,
    /// When set, samples found in more than this fraction of documents
    /// are treated as generic and left out of the rate.
    pub generic_doc_fraction: Option<f64>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct CategoryLeak {
    pub samples: u64,
    pub leaked: u64,
    pub leak_rate: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ContaminationReport {
    pub benchmark: String,
    pub normalization_hash: String,
    pub min_query_tokens: usize,
    /// Match count per queryable sample.
    pub counts: BTreeMap<String, u64>,
    pub unqueryable: Vec<String>,
    pub generic: Vec<String>,
    pub queryable: u64,
    pub leaked: u64,
    pub leak_rate: f64,
    /// Median count over leaked samples; absent when nothing leaked.
    pub median_occurrences: Option<f64>,
    pub per_category: BTreeMap<String, CategoryLeak>,
}

pub fn median(values: &mut [u64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_unstable();
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2] as f64
    } else {
        (values[n / 2 - 1] + values[n / 2]) as f64 / 2.0
    })
}

enum Outcome {
    Count(u64),
    Unqueryable,
    Generic,
}

pub fn contamination_rate(
    index: &NGramIndex,
    bench: &BenchmarkSet,
    opts: &ContaminationOptions,
) -> Result<ContaminationReport> {
    if let Some(spec) = opts.expected_spec {
        if spec != index.spec() {
            return Err(Error::config(format!(
                "index normalization {:?} differs from the requested {:?}",
                index.spec(),
                spec
            )));
        }
    }
    let outcomes = bench
        .samples
        .par_iter()
        .map(|s| {
            let query = s.query_text(opts.mode);
            let r = match opts.generic_doc_fraction {
                Some(_) => index.match_docs(&query, usize::MAX),
                None => index.count_matches(&query),
            };
            match r {
                Err(Error::Config(_)) => Ok(Outcome::Unqueryable),
                Err(e) => Err(e),
                Ok(m) => {
                    let generic = opts.generic_doc_fraction.is_some_and(|f| {
                        m.doc_ids.len() as f64 > f * index.num_docs().max(1) as f64
                    });
                    Ok(if generic {
                        Outcome::Generic
                    } else {
                        Outcome::Count(m.count)
                    })
                }
            }
        })
        .collect::<Result<Vec<_>>>()?;

    let mut report = ContaminationReport {
        benchmark: bench.name.clone(),
        normalization_hash: format!("{:016x}", index.spec().hash()),
        min_query_tokens: index.min_query_tokens(),
        ..Default::default()
    };
    let mut leaked_counts = Vec::new();
    for (s, outcome) in bench.samples.iter().zip(outcomes) {
        match outcome {
            Outcome::Unqueryable => report.unqueryable.push(s.id.clone()),
            Outcome::Generic => report.generic.push(s.id.clone()),
            Outcome::Count(c) => {
                report.counts.insert(s.id.clone(), c);
                let cat = report
                    .per_category
                    .entry(s.category().to_string())
                    .or_default();
                cat.samples += 1;
                if c > 0 {
                    cat.leaked += 1;
                    leaked_counts.push(c);
                }
            }
        }
    }
    for cat in report.per_category.values_mut() {
        cat.leak_rate = cat.leaked as f64 / cat.samples as f64;
    }
    report.queryable = report.counts.len() as u64;
    report.leaked = leaked_counts.len() as u64;
    report.leak_rate = if report.queryable == 0 {
        0.0
    } else {
        report.leaked as f64 / report.queryable as f64
    };
    report.median_occurrences = median(&mut leaked_counts);
    Ok(report)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Splits {
    pub contaminated: BenchmarkSet,
    pub clean: BenchmarkSet,
    /// Samples left out of both splits (too short or generic).
    pub excluded: Vec<String>,
}

pub fn split_benchmark(report: &ContaminationReport, bench: &BenchmarkSet) -> Result<Splits> {
    let excluded: HashSet<&str> = report
        .unqueryable
        .iter()
        .chain(&report.generic)
        .map(String::as_str)
        .collect();
    let expected = report.counts.len() + excluded.len();
    if expected != bench.len() {
        return Err(Error::data(format!(
            "report covers {expected} samples but `{}` has {}",
            bench.name,
            bench.len()
        )));
    }
    let mut splits = Splits {
        contaminated: BenchmarkSet {
            name: format!("{}.contaminated", bench.name),
            samples: Vec::new(),
        },
        clean: BenchmarkSet {
            name: format!("{}.clean", bench.name),
            samples: Vec::new(),
        },
        excluded: Vec::new(),
    };
    for s in &bench.samples {
        match report.counts.get(&s.id) {
            Some(&c) if c > 0 => splits.contaminated.samples.push(s.clone()),
            Some(_) => splits.clean.samples.push(s.clone()),
            None if excluded.contains(s.id.as_str()) => splits.excluded.push(s.id.clone()),
            None => {
                return Err(Error::data(format!(
                    "sample `{}` is not in the report",
                    s.id
                )))
            }
        }
    }
    Ok(splits)
}

/// Reads `{id, correct}` lines; `correct` may be 0/1 or a boolean.
pub fn load_correctness(path: &Path) -> Result<BTreeMap<String, bool>> {
    #[derive(Deserialize)]
    struct Row {
        id: String,
        correct: Value,
    }
    let file = std::fs::File::open(path).map_err(|e| Error::io(path, e))?;
    let mut out = BTreeMap::new();
    for (i, line) in std::io::BufReader::new(file).lines().enumerate() {
        let line = line.map_err(|e| Error::io(path, e))?;
        if line.trim().is_empty() {
            continue;
        }
        let malformed = |reason: String| Error::Malformed {
            shard: path.display().to_string(),
            line: i + 1,
            reason,
        };
        let row: Row = serde_json::from_str(&line).map_err(|e| malformed(e.to_string()))?;
        let ok = match row.correct {
            Value::Bool(b) => b,
            Value::Number(n) if n.as_u64() == Some(0) => false,
            Value::Number(n) if n.as_u64() == Some(1) => true,
            other => {
                return Err(malformed(format!(
                    "`correct` must be 0/1 or a boolean, got {other}"
                )))
            }
        };
        out.insert(row.id, ok);
    }
    Ok(out)
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SplitAccuracy {
    pub samples: u64,
    pub correct: u64,
    /// Percent; absent for an empty split.
    pub accuracy: Option<f64>,
}

impl SplitAccuracy {
    fn add(&mut self, ok: bool) {
        self.samples += 1;
        self.correct += ok as u64;
    }

    fn finish(&mut self) {
        self.accuracy =
            (self.samples > 0).then(|| 100.0 * self.correct as f64 / self.samples as f64);
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapRow {
    pub category: String,
    pub contaminated: SplitAccuracy,
    pub clean: SplitAccuracy,
    /// Contaminated minus clean accuracy, in points.
    pub gap: Option<f64>,
}

impl GapRow {
    fn finish(&mut self) {
        self.contaminated.finish();
        self.clean.finish();
        self.gap = match (self.contaminated.accuracy, self.clean.accuracy) {
            (Some(a), Some(b)) => Some(a - b),
            _ => None,
        };
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct GapReport {
    pub rows: Vec<GapRow>,
    pub overall: GapRow,
}

fn fmt_opt(v: Option<f64>, signed: bool) -> String {
    match (v, signed) {
        (Some(v), true) => format!("{v:+.2}"),
        (Some(v), false) => format!("{v:.2}"),
        (None, _) => "-".into(),
    }
}

impl GapReport {
    pub fn render(&self) -> String {
        let mut out = format!(
            "{:<28} {:>8} {:>12} {:>8} {:>12} {:>8}\n",
            "category", "n_cont", "acc_cont", "n_clean", "acc_clean", "gap"
        );
        for row in self.rows.iter().chain(std::iter::once(&self.overall)) {
            let _ = writeln!(
                out,
                "{:<28} {:>8} {:>12} {:>8} {:>12} {:>8}",
                row.category,
                row.contaminated.samples,
                fmt_opt(row.contaminated.accuracy, false),
                row.clean.samples,
                fmt_opt(row.clean.accuracy, false),
                fmt_opt(row.gap, true),
            );
        }
        out
    }
}

/// Accuracy per category on each split, and the gap between them.
pub fn score_gap(
    correct: &BTreeMap<String, bool>,
    contaminated: &BenchmarkSet,
    clean: &BenchmarkSet,
) -> Result<GapReport> {
    let mut rows: BTreeMap<String, GapRow> = BTreeMap::new();
    let mut overall = GapRow {
        category: "overall".into(),
        ..Default::default()
    };
    for (set, is_cont) in [(contaminated, true), (clean, false)] {
        for s in &set.samples {
            let ok = *correct.get(&s.id).ok_or_else(|| {
                Error::data(format!("no correctness entry for sample `{}`", s.id))
            })?;
            let row = rows
                .entry(s.category().to_string())
                .or_insert_with(|| GapRow {
                    category: s.category().to_string(),
                    ..Default::default()
                });
            if is_cont {
                row.contaminated.add(ok);
                overall.contaminated.add(ok);
            } else {
                row.clean.add(ok);
                overall.clean.add(ok);
            }
        }
    }
    let mut rows: Vec<GapRow> = rows.into_values().collect();
    rows.iter_mut().for_each(GapRow::finish);
    overall.finish();
    Ok(GapReport { rows, overall })
}

/// A benchmark sample rendered as a document, tagged with its family.
#[derive(Debug, Clone, PartialEq)]
pub struct Needle {
    pub doc: Document,
    pub family: String,
}

pub fn render_needles(bench: &BenchmarkSet) -> Vec<Needle> {
    bench
        .samples
        .iter()
        .map(|s| Needle {
            doc: s.render(&bench.name),
            family: bench.name.clone(),
        })
        .collect()
}

pub fn percentile(rank: u64, n: u64) -> f64 {
    100.0 * (1.0 - (rank - 1) as f64 / n as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NeedleRank {
    pub id: String,
    pub family: String,
    pub score: f64,
    pub rank: u64,
    pub percentile: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FamilySummary {
    pub needles: u64,
    pub best_rank: u64,
    pub worst_rank: u64,
    pub mean_percentile: f64,
    pub median_percentile: f64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ScorerRanking {
    pub scorer: String,
    pub needles: Vec<NeedleRank>,
    pub families: BTreeMap<String, FamilySummary>,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct BiahsResult {
    pub convention: String,
    pub total_docs: u64,
    pub needle_docs: u64,
    pub scorers: Vec<ScorerRanking>,
}

const SCORE_BATCH: usize = 4096;

fn score_batch(
    batch: &[Document],
    scorers: &[&dyn Scorer],
    keys: &mut [Vec<RankKey>],
) -> Result<()> {
    for (scorer, out) in scorers.iter().zip(keys.iter_mut()) {
        let scored = batch
            .par_iter()
            .map(|d| {
                let s = scorer.score(d).map_err(|e| {
                    Error::data(format!(
                        "scorer `{}` failed on `{}`: {e}",
                        scorer.name(),
                        d.id
                    ))
                })?;
                if s.is_nan() {
                    return Err(Error::data(format!(
                        "scorer `{}` returned NaN for `{}`",
                        scorer.name(),
                        d.id
                    )));
                }
                Ok(RankKey {
                    score: s,
                    id: d.id.clone(),
                })
            })
            .collect::<Result<Vec<_>>>()?;
        out.extend(scored);
    }
    Ok(())
}

/// Scores the haystack plus needles with every scorer and reports where
/// each needle lands in the full descending ranking.
pub fn biahs_run<I>(hay: I, needles: &[Needle], scorers: &[&dyn Scorer]) -> Result<BiahsResult>
where
    I: IntoIterator<Item = Result<Document>>,
{
    if scorers.is_empty() {
        return Err(Error::config("at least one scorer is required"));
    }
    let mut needle_ids = HashSet::new();
    for n in needles {
        if !needle_ids.insert(n.doc.id.as_str()) {
            return Err(Error::data(format!("duplicate needle id `{}`", n.doc.id)));
        }
    }
    let mut keys: Vec<Vec<RankKey>> = vec![Vec::new(); scorers.len()];
    let mut batch = Vec::with_capacity(SCORE_BATCH);
    for doc in hay {
        let doc = doc?;
        if needle_ids.contains(doc.id.as_str()) {
            return Err(Error::data(format!(
                "haystack id `{}` collides with a needle",
                doc.id
            )));
        }
        batch.push(doc);
        if batch.len() == SCORE_BATCH {
            score_batch(&batch, scorers, &mut keys)?;
            batch.clear();
        }
    }
    batch.extend(needles.iter().map(|n| n.doc.clone()));
    score_batch(&batch, scorers, &mut keys)?;

    let n = keys[0].len() as u64;
    let mut result = BiahsResult {
        convention: PERCENTILE_CONVENTION.into(),
        total_docs: n,
        needle_docs: needles.len() as u64,
        scorers: Vec::new(),
    };
    for (scorer, mut ks) in scorers.iter().zip(keys) {
        ks.par_sort_unstable_by(|a, b| b.cmp(a));
        let rank_of: BTreeMap<&str, (u64, f64)> = ks
            .iter()
            .enumerate()
            .filter(|(_, k)| needle_ids.contains(k.id.as_str()))
            .map(|(i, k)| (k.id.as_str(), (i as u64 + 1, k.score)))
            .collect();
        let ranked: Vec<NeedleRank> = needles
            .iter()
            .map(|nd| {
                let (rank, score) = rank_of[nd.doc.id.as_str()];
                NeedleRank {
                    id: nd.doc.id.clone(),
                    family: nd.family.clone(),
                    score,
                    rank,
                    percentile: percentile(rank, n),
                }
            })
            .collect();
        let mut by_family: BTreeMap<String, Vec<&NeedleRank>> = BTreeMap::new();
        for r in &ranked {
            by_family.entry(r.family.clone()).or_default().push(r);
        }
        let families = by_family
            .into_iter()
            .map(|(fam, rs)| {
                let mut pct: Vec<f64> = rs.iter().map(|r| r.percentile).collect();
                pct.sort_by(f64::total_cmp);
                let m = pct.len();
                let median = if m % 2 == 1 {
                    pct[m / 2]
                } else {
                    (pct[m / 2 - 1] + pct[m / 2]) / 2.0
                };
                let summary = FamilySummary {
                    needles: m as u64,
                    best_rank: rs.iter().map(|r| r.rank).min().unwrap_or(0),
                    worst_rank: rs.iter().map(|r| r.rank).max().unwrap_or(0),
                    mean_percentile: pct.iter().sum::<f64>() / m as f64,
                    median_percentile: median,
                };
                (fam, summary)
            })
            .collect();
        result.scorers.push(ScorerRanking {
            scorer: scorer.name(),
            needles: ranked,
            families,
        });
    }
    Ok(result)
}

impl BiahsResult {
    pub fn render(&self) -> String {
        let mut out = format!(
            "# {}\n# N = {}, needles = {}\n",
            self.convention, self.total_docs, self.needle_docs
        );
        let _ = writeln!(
            out,
            "{:<24} {:<16} {:>8} {:>10} {:>10} {:>10}",
            "scorer", "family", "needles", "best", "worst", "median_pct"
        );
        for s in &self.scorers {
            for (fam, f) in &s.families {
                let _ = writeln!(
                    out,
                    "{:<24} {:<16} {:>8} {:>10} {:>10} {:>10.3}",
                    s.scorer, fam, f.needles, f.best_rank, f.worst_rank, f.median_percentile
                );
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::filtering::{ConstantScorer, FnScorer};
    use crate::ngram_index::build_index;

    fn sample(id: &str, q: &str, cat: &str) -> BenchmarkSample {
        BenchmarkSample {
            id: id.into(),
            question: q.into(),
            choices: vec![],
            answer: Value::Null,
            category: Some(cat.into()),
            subset: None,
        }
    }

    fn question(i: usize) -> String {
        format!("what is the value of quantity number q{i} in the standard unit system today")
    }

    fn bench(n: usize) -> BenchmarkSet {
        BenchmarkSet::new(
            "mmlu",
            (0..n)
                .map(|i| sample(&format!("s{i:03}"), &question(i), ["a", "b"][i % 2]))
                .collect(),
        )
        .unwrap()
    }

    fn corpus(planted: &[(usize, usize)]) -> Vec<Document> {
        let mut docs = vec![Document::new(
            "web-0",
            "unrelated text about the weather and cooking",
            "en",
            "web",
        )];
        for &(q, times) in planted {
            for t in 0..times {
                docs.push(Document::new(
                    format!("web-{q}-{t}"),
                    format!("intro {} outro", question(q)),
                    "en",
                    "web",
                ));
            }
        }
        docs
    }

    #[test]
    fn nothing_leaks() {
        let idx = build_index(corpus(&[]), NormalizationSpec::default()).unwrap();
        let r = contamination_rate(&idx, &bench(10), &ContaminationOptions::default()).unwrap();
        assert_eq!(r.leak_rate, 0.0);
        assert_eq!(r.median_occurrences, None);
        let s = split_benchmark(&r, &bench(10)).unwrap();
        assert!(s.contaminated.is_empty());
        assert_eq!(s.clean.len(), 10);
    }

    #[test]
    fn all_planted_once() {
        let plant: Vec<_> = (0..20).map(|i| (i, 1)).collect();
        let idx = build_index(corpus(&plant), NormalizationSpec::default()).unwrap();
        let r = contamination_rate(&idx, &bench(20), &ContaminationOptions::default()).unwrap();
        assert_eq!((r.leak_rate, r.median_occurrences), (1.0, Some(1.0)));
    }

    #[test]
    fn unqueryable_excluded() {
        let mut b = bench(4);
        b.samples.push(sample("short", "too short", "a"));
        let idx = build_index(corpus(&[(0, 3)]), NormalizationSpec::default()).unwrap();
        let r = contamination_rate(&idx, &b, &ContaminationOptions::default()).unwrap();
        assert_eq!(r.unqueryable, vec!["short"]);
        assert_eq!(r.queryable, 4);
        assert_eq!(r.leak_rate, 0.25);
        assert_eq!(r.median_occurrences, Some(3.0));
        let s = split_benchmark(&r, &b).unwrap();
        assert_eq!(
            (s.contaminated.len(), s.clean.len(), s.excluded.len()),
            (1, 3, 1)
        );
    }

    #[test]
    fn generic_flag_and_spec_mismatch() {
        let idx = build_index(corpus(&[(0, 3)]), NormalizationSpec::default()).unwrap();
        let opts = ContaminationOptions {
            generic_doc_fraction: Some(0.5),
            ..Default::default()
        };
        let r = contamination_rate(&idx, &bench(2), &opts).unwrap();
        assert_eq!(r.generic, vec!["s000"]);
        let opts = ContaminationOptions {
            expected_spec: Some(NormalizationSpec::byte()),
            ..Default::default()
        };
        assert!(contamination_rate(&idx, &bench(2), &opts).is_err());
    }

    #[test]
    fn split_rejects_foreign_report() {
        let idx = build_index(corpus(&[]), NormalizationSpec::default()).unwrap();
        let r = contamination_rate(&idx, &bench(3), &ContaminationOptions::default()).unwrap();
        assert!(split_benchmark(&r, &bench(4)).is_err());
    }

    #[test]
    fn gap_arithmetic() {
        let cont = BenchmarkSet::new(
            "c",
            (0..5)
                .map(|i| sample(&format!("c{i}"), "q x", "a"))
                .collect(),
        )
        .unwrap();
        let clean = BenchmarkSet::new(
            "k",
            (0..4)
                .map(|i| sample(&format!("k{i}"), "q x", "a"))
                .collect(),
        )
        .unwrap();
        let mut correct = BTreeMap::new();
        for i in 0..5 {
            correct.insert(format!("c{i}"), i < 3);
        }
        for i in 0..4 {
            correct.insert(format!("k{i}"), i < 2);
        }
        let g = score_gap(&correct, &cont, &clean).unwrap();
        assert_eq!(g.overall.contaminated.accuracy, Some(60.0));
        assert_eq!(g.overall.clean.accuracy, Some(50.0));
        assert!((g.overall.gap.unwrap() - 10.0).abs() < 1e-12);
        assert!(g.render().contains("+10.00"));
        correct.remove("k3");
        assert!(score_gap(&correct, &cont, &clean)
            .unwrap_err()
            .to_string()
            .contains("k3"));
    }

    #[test]
    fn rendering_uses_choices() {
        let s = BenchmarkSample {
            id: "x".into(),
            question: "2+2?".into(),
            choices: vec!["3".into(), "4".into()],
            answer: Value::from(1),
            category: None,
            subset: None,
        };
        let d = s.render("mmlu");
        assert_eq!(d.text, "2+2?\nA. 3\nB. 4\nAnswer: 4");
        assert_eq!(s.query_text(QueryMode::QuestionAnswer), "2+2? 4");
        let letter = BenchmarkSample {
            answer: Value::from("A"),
            ..s
        };
        assert_eq!(letter.answer_text(), "3");
    }

    fn hay(n: usize) -> Vec<Result<Document>> {
        (0..n)
            .map(|i| Ok(Document::new(format!("h{i:06}"), "web text", "en", "web")))
            .collect()
    }

    #[test]
    fn oracle_ranks_needles_first() {
        let needles: Vec<Needle> = (0..5)
            .map(|i| Needle {
                doc: Document::new(format!("n{i}"), "q", "en", "bench"),
                family: "f".into(),
            })
            .collect();
        let oracle = FnScorer {
            label: "oracle".into(),
            f: |d: &Document| Ok(if d.id.starts_with('n') { 1.0 } else { 0.0 }),
        };
        let r = biahs_run(hay(95), &needles, &[&oracle]).unwrap();
        assert_eq!(r.total_docs, 100);
        assert!(r.scorers[0]
            .needles
            .iter()
            .all(|n| n.rank <= 5 && n.percentile >= 96.0));
        assert_eq!(r.scorers[0].needles[0].rank, 1);
        assert_eq!(r.scorers[0].needles[0].percentile, 100.0);
    }

    #[test]
    fn constant_scorer_ties_by_id() {
        let needles = vec![Needle {
            doc: Document::new("a-needle", "q", "en", "bench"),
            family: "f".into(),
        }];
        let constant = ConstantScorer(0.5);
        let r = biahs_run(hay(10), &needles, &[&constant]).unwrap();
        assert_eq!(r.scorers[0].needles[0].rank, 1);
        let late = vec![Needle {
            doc: Document::new("z-needle", "q", "en", "bench"),
            family: "f".into(),
        }];
        let r = biahs_run(hay(10), &late, &[&constant]).unwrap();
        assert_eq!(r.scorers[0].needles[0].rank, 11);
        assert!((r.scorers[0].needles[0].percentile - 100.0 * (1.0 - 10.0 / 11.0)).abs() < 1e-12);
    }

    #[test]
    fn id_collision_rejected() {
        let needles = vec![Needle {
            doc: Document::new("h000001", "q", "en", "bench"),
            family: "f".into(),
        }];
        assert!(biahs_run(hay(3), &needles, &[&ConstantScorer(0.0)]).is_err());
    }
}

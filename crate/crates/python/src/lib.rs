//! Python bindings. Documents, reports and plans cross the boundary as
//! plain dicts and lists.

use std::collections::BTreeMap;
use std::path::PathBuf;

use gprn_core::audit::{self, BenchmarkSet, ContaminationOptions, QueryMode};
use gprn_core::corpus_io::{self, ReadOptions, WriteOptions};
use gprn_core::dedup::{band_collision_probability, Deduplicator};
use gprn_core::error::{Error, ErrorKind};
use gprn_core::filtering::{self, FilterConfig, FilterDecision};
use gprn_core::game::{self, GameParams, SweepAxis};
use gprn_core::mixing::{self, MultinomialSampler, PoisonDoc};
use gprn_core::ngram_index::{self, NormalizationSpec};
use gprn_core::packing::{self, PackConfig, TokenSequence};
use gprn_core::{Document, ShardManifest};
use pyo3::exceptions::{PyOSError, PyRuntimeError, PyValueError};
use pyo3::prelude::*;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::de::DeserializeOwned;
use serde::Serialize;

fn err(e: Error) -> PyErr {
    match e.kind() {
        ErrorKind::Io => PyOSError::new_err(e.to_string()),
        ErrorKind::Usage => PyValueError::new_err(e.to_string()),
        ErrorKind::Data => PyRuntimeError::new_err(e.to_string()),
    }
}

fn to_py<'py>(py: Python<'py>, v: &impl Serialize) -> PyResult<Bound<'py, PyAny>> {
    let s = serde_json::to_string(v).map_err(|e| PyRuntimeError::new_err(e.to_string()))?;
    py.import("json")?.call_method1("loads", (s,))
}

fn from_py<T: DeserializeOwned>(obj: &Bound<'_, PyAny>) -> PyResult<T> {
    let s: String = obj
        .py()
        .import("json")?
        .call_method1("dumps", (obj,))?
        .extract()?;
    serde_json::from_str(&s).map_err(|e| PyValueError::new_err(e.to_string()))
}

/// Recomputes quality statistics into `meta`.
#[pyfunction]
fn enrich<'py>(py: Python<'py>, doc: &Bound<'py, PyAny>) -> PyResult<Bound<'py, PyAny>> {
    let doc: Document = from_py(doc)?;
    to_py(
        py,
        &filtering::enrich(doc, &FilterConfig::default()).map_err(err)?,
    )
}

/// Name of the first violated rule, or None when the document is kept.
#[pyfunction]
#[pyo3(signature = (doc, strict = false))]
fn heuristic_filter(doc: &Bound<'_, PyAny>, strict: bool) -> PyResult<Option<String>> {
    let doc: Document = from_py(doc)?;
    Ok(
        match filtering::heuristic_filter(&doc, &FilterConfig::default(), strict).map_err(err)? {
            FilterDecision::Keep => None,
            FilterDecision::Drop { rule, .. } => Some(rule.to_string()),
        },
    )
}

/// `(keep, bucket_name)` from `meta.ppl_bucket` and `meta.quality_label`.
#[pyfunction]
fn bucket_gate(doc: &Bound<'_, PyAny>) -> PyResult<(bool, String)> {
    let mut doc: Document = from_py(doc)?;
    let g = filtering::bucket_gate(&mut doc).map_err(err)?;
    Ok((g.keep, g.bucket.name()))
}

/// Near-duplicate removal. Returns the survivors (with `meta.dup_count`)
/// and a map from every id to its cluster representative.
#[pyfunction]
#[pyo3(signature = (docs, splits = 10, seed = 0, single_stage = false))]
fn dedup<'py>(
    py: Python<'py>,
    docs: &Bound<'py, PyAny>,
    splits: usize,
    seed: u64,
    single_stage: bool,
) -> PyResult<(Bound<'py, PyAny>, BTreeMap<String, String>)> {
    let docs: Vec<Document> = from_py(docs)?;
    let d = Deduplicator::new(seed);
    let out = py
        .detach(|| {
            if single_stage {
                d.single_stage(docs)
            } else {
                d.two_stage(docs, splits)
            }
        })
        .map_err(err)?;
    let reps = out
        .clusters
        .assignment
        .iter()
        .map(|(id, &c)| (id.clone(), out.clusters.representatives[c].clone()))
        .collect();
    Ok((to_py(py, &out.survivors)?, reps))
}

/// Probability that a pair with Jaccard similarity `s` shares a band.
#[pyfunction]
fn lsh_probability(s: f64) -> f64 {
    band_collision_probability(s)
}

#[pyfunction]
fn read_shards<'py>(py: Python<'py>, path: PathBuf) -> PyResult<Bound<'py, PyAny>> {
    let manifest = ShardManifest::open(&path).map_err(err)?;
    let (docs, _) = corpus_io::read_all(manifest, ReadOptions::default()).map_err(err)?;
    to_py(py, &docs)
}

/// Writes documents as JSONL shards with a manifest; returns the count.
#[pyfunction]
#[pyo3(signature = (docs, dir, gzip = false))]
fn write_shards(docs: &Bound<'_, PyAny>, dir: PathBuf, gzip: bool) -> PyResult<u64> {
    let docs: Vec<Document> = from_py(docs)?;
    let opts = WriteOptions {
        gzip,
        ..Default::default()
    };
    let manifest = corpus_io::write_stream(docs, dir, opts).map_err(err)?;
    Ok(manifest.total_docs())
}

#[pyclass(name = "MultinomialSampler", module = "gprn")]
struct PySampler {
    inner: MultinomialSampler,
}

#[pymethods]
impl PySampler {
    #[new]
    fn new(weights: BTreeMap<String, f64>) -> PyResult<Self> {
        Ok(PySampler {
            inner: MultinomialSampler::new(&weights).map_err(err)?,
        })
    }

    /// Source chosen by draw number `draw` of stream `seed`.
    fn draw(&self, seed: u64, draw: u64) -> String {
        self.inner.names()[self.inner.draw(seed, draw)].clone()
    }

    fn probabilities(&self) -> BTreeMap<String, f64> {
        self.inner
            .names()
            .iter()
            .cloned()
            .zip(self.inner.probabilities())
            .collect()
    }
}

/// Packs token sequences into `seq_len` blocks, flushing every
/// `group_size` sequences. Returns the blocks and the waste report.
#[pyfunction]
#[pyo3(signature = (seqs, seq_len = 4096, group_size = 8192))]
fn pack<'py>(
    py: Python<'py>,
    seqs: Vec<Vec<u32>>,
    seq_len: usize,
    group_size: usize,
) -> PyResult<(Vec<Vec<u32>>, Bound<'py, PyAny>)> {
    let seqs = seqs
        .into_iter()
        .enumerate()
        .map(|(i, t)| TokenSequence::new(format!("seq-{i}"), t, u32::MAX))
        .collect::<Result<Vec<_>, _>>()
        .map_err(err)?;
    let cfg = PackConfig {
        seq_len,
        group_size,
    };
    let (blocks, report) = packing::pack(seqs.iter(), cfg).map_err(err)?;
    Ok((blocks, to_py(py, &report)?))
}

#[pyclass(name = "NGramIndex", module = "gprn")]
struct PyIndex {
    inner: Option<ngram_index::NGramIndex>,
}

impl PyIndex {
    fn get(&self) -> &ngram_index::NGramIndex {
        self.inner.as_ref().expect("index present")
    }
}

#[pymethods]
impl PyIndex {
    /// Builds an exact-match index over documents (dicts with `id` and `text`).
    #[new]
    #[pyo3(signature = (docs, byte_mode = false, min_query_tokens = 8))]
    fn new(
        py: Python<'_>,
        docs: &Bound<'_, PyAny>,
        byte_mode: bool,
        min_query_tokens: usize,
    ) -> PyResult<Self> {
        let docs: Vec<Document> = from_py(docs)?;
        let spec = if byte_mode {
            NormalizationSpec::byte()
        } else {
            NormalizationSpec::default()
        };
        let idx = py
            .detach(|| ngram_index::build_index(docs, spec))
            .map_err(err)?;
        Ok(PyIndex {
            inner: Some(idx.with_min_query_tokens(min_query_tokens)),
        })
    }

    #[staticmethod]
    fn load(path: PathBuf) -> PyResult<Self> {
        Ok(PyIndex {
            inner: Some(ngram_index::NGramIndex::load(&path).map_err(err)?),
        })
    }

    fn save(&self, path: PathBuf) -> PyResult<()> {
        self.get().save(&path).map_err(err)
    }

    fn count(&self, query: &str) -> PyResult<u64> {
        Ok(self.get().count_matches(query).map_err(err)?.count)
    }

    /// `(count, doc_ids)` with at most `limit` distinct ids.
    #[pyo3(signature = (query, limit = 10))]
    fn match_docs(&self, query: &str, limit: usize) -> PyResult<(u64, Vec<String>)> {
        let m = self.get().match_docs(query, limit).map_err(err)?;
        Ok((m.count, m.doc_ids))
    }

    #[getter]
    fn num_positions(&self) -> usize {
        self.get().num_positions()
    }

    #[getter]
    fn num_docs(&self) -> usize {
        self.get().num_docs()
    }

    #[getter]
    fn min_query_tokens(&self) -> usize {
        self.get().min_query_tokens()
    }

    #[setter]
    fn set_min_query_tokens(&mut self, n: usize) {
        self.inner = self.inner.take().map(|i| i.with_min_query_tokens(n));
    }

    /// Leak statistics for a benchmark JSONL file.
    #[pyo3(signature = (bench_path, question_answer = false))]
    fn contamination<'py>(
        &self,
        py: Python<'py>,
        bench_path: PathBuf,
        question_answer: bool,
    ) -> PyResult<Bound<'py, PyAny>> {
        let bench = BenchmarkSet::load(&bench_path).map_err(err)?;
        let opts = ContaminationOptions {
            mode: if question_answer {
                QueryMode::QuestionAnswer
            } else {
                QueryMode::Question
            },
            ..Default::default()
        };
        to_py(
            py,
            &audit::contamination_rate(self.get(), &bench, &opts).map_err(err)?,
        )
    }
}

fn params(m: f64, alpha: f64, beta: f64, gamma: f64, p: &str) -> PyResult<GameParams> {
    let params = GameParams {
        m,
        alpha,
        beta,
        gamma,
        p: p.parse().map_err(err)?,
    };
    params.validate().map_err(err)?;
    Ok(params)
}

#[pyfunction]
#[pyo3(signature = (m, alpha, beta, gamma, p = "pow:2"))]
fn solve_equilibrium<'py>(
    py: Python<'py>,
    m: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    p: &str,
) -> PyResult<Bound<'py, PyAny>> {
    let eq = game::solve_equilibrium(&params(m, alpha, beta, gamma, p)?).map_err(err)?;
    to_py(py, &eq)
}

/// Equilibria across `values` of one parameter (`m`, `alpha`, `beta`,
/// `gamma` or `p`).
#[pyfunction]
#[pyo3(signature = (m, alpha, beta, gamma, p, axis, values))]
#[allow(clippy::too_many_arguments)]
fn sweep<'py>(
    py: Python<'py>,
    m: f64,
    alpha: f64,
    beta: f64,
    gamma: f64,
    p: &str,
    axis: &str,
    values: Vec<f64>,
) -> PyResult<Bound<'py, PyAny>> {
    let base = params(m, alpha, beta, gamma, p)?;
    let axis: SweepAxis = axis.parse().map_err(err)?;
    to_py(py, &game::sweep(&base, axis, &values).map_err(err)?)
}

/// Plans random token offsets for poison documents of the given lengths.
#[pyfunction]
#[pyo3(signature = (lengths, total_tokens, seed = 0))]
fn schedule_poison<'py>(
    py: Python<'py>,
    lengths: Vec<u64>,
    total_tokens: u64,
    seed: u64,
) -> PyResult<Bound<'py, PyAny>> {
    let docs = lengths
        .into_iter()
        .enumerate()
        .map(|(i, tokens)| PoisonDoc {
            id: format!("poison-{i:06}"),
            tokens,
        })
        .collect();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    to_py(
        py,
        &mixing::schedule_poison(docs, total_tokens, &mut rng).map_err(err)?,
    )
}

#[pymodule]
fn gprn(m: &Bound<'_, PyModule>) -> PyResult<()> {
    m.add("__version__", env!("CARGO_PKG_VERSION"))?;
    m.add_function(wrap_pyfunction!(enrich, m)?)?;
    m.add_function(wrap_pyfunction!(heuristic_filter, m)?)?;
    m.add_function(wrap_pyfunction!(bucket_gate, m)?)?;
    m.add_function(wrap_pyfunction!(dedup, m)?)?;
    m.add_function(wrap_pyfunction!(lsh_probability, m)?)?;
    m.add_function(wrap_pyfunction!(read_shards, m)?)?;
    m.add_function(wrap_pyfunction!(write_shards, m)?)?;
    m.add_function(wrap_pyfunction!(pack, m)?)?;
    m.add_function(wrap_pyfunction!(solve_equilibrium, m)?)?;
    m.add_function(wrap_pyfunction!(sweep, m)?)?;
    m.add_function(wrap_pyfunction!(schedule_poison, m)?)?;
    m.add_class::<PySampler>()?;
    m.add_class::<PyIndex>()?;
    Ok(())
}

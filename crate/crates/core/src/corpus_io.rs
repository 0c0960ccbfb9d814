//! Line-delimited corpus shards: the [`Document`] record, shard manifests,
//! streaming readers and size-limited shard writers.
//!
//! One record per line, UTF-8 JSON with required `id`, `text`, `lang`,
//! `source` and an open `meta` object. Files ending in `.gz` are gzip
//! compressed.

use std::collections::{BTreeMap, HashSet};
use std::fmt;
use std::fs::{self, File};
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use flate2::read::MultiGzDecoder;
use flate2::write::GzEncoder;
use flate2::Compression;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const DEFAULT_SHARD_LIMIT: usize = 100_000;

/// A scalar metadata value.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum MetaValue {
    Int(i64),
    Float(f64),
    Str(String),
}

impl MetaValue {
    pub fn as_f64(&self) -> Option<f64> {
        match self {
            MetaValue::Int(v) => Some(*v as f64),
            MetaValue::Float(v) => Some(*v),
            MetaValue::Str(_) => None,
        }
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            MetaValue::Str(s) => Some(s),
            _ => None,
        }
    }
}

impl From<f64> for MetaValue {
    fn from(v: f64) -> Self {
        MetaValue::Float(v)
    }
}

impl From<i64> for MetaValue {
    fn from(v: i64) -> Self {
        MetaValue::Int(v)
    }
}

impl From<u64> for MetaValue {
    fn from(v: u64) -> Self {
        MetaValue::Int(v as i64)
    }
}

impl From<&str> for MetaValue {
    fn from(v: &str) -> Self {
        MetaValue::Str(v.to_string())
    }
}

impl From<String> for MetaValue {
    fn from(v: String) -> Self {
        MetaValue::Str(v)
    }
}

/// Classifier quality label.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum QualityLabel {
    Low,
    Medium,
    High,
}

/// Perplexity segment of the source crawl.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum PplBucket {
    Head,
    Middle,
    Tail,
}

impl QualityLabel {
    pub const ALL: [QualityLabel; 3] =
        [QualityLabel::Low, QualityLabel::Medium, QualityLabel::High];

    pub fn as_str(self) -> &'static str {
        match self {
            QualityLabel::Low => "low",
            QualityLabel::Medium => "medium",
            QualityLabel::High => "high",
        }
    }
}

impl PplBucket {
    pub const ALL: [PplBucket; 3] = [PplBucket::Head, PplBucket::Middle, PplBucket::Tail];

    pub fn as_str(self) -> &'static str {
        match self {
            PplBucket::Head => "head",
            PplBucket::Middle => "middle",
            PplBucket::Tail => "tail",
        }
    }
}

impl FromStr for QualityLabel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "low" => Ok(QualityLabel::Low),
            "medium" => Ok(QualityLabel::Medium),
            "high" => Ok(QualityLabel::High),
            other => Err(Error::InvalidDocument(format!(
                "quality_label `{other}` not in {{low, medium, high}}"
            ))),
        }
    }
}

impl FromStr for PplBucket {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "head" => Ok(PplBucket::Head),
            "middle" => Ok(PplBucket::Middle),
            "tail" => Ok(PplBucket::Tail),
            other => Err(Error::InvalidDocument(format!(
                "ppl_bucket `{other}` not in {{head, middle, tail}}"
            ))),
        }
    }
}

impl fmt::Display for QualityLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl fmt::Display for PplBucket {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// One corpus record.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: String,
    pub text: String,
    pub lang: String,
    pub source: String,
    #[serde(default)]
    pub meta: BTreeMap<String, MetaValue>,
}

impl Document {
    pub fn new(
        id: impl Into<String>,
        text: impl Into<String>,
        lang: impl Into<String>,
        source: impl Into<String>,
    ) -> Self {
        Document {
            id: id.into(),
            text: text.into(),
            lang: lang.into(),
            source: source.into(),
            meta: BTreeMap::new(),
        }
    }

    /// Builds a document from raw text bytes, rejecting invalid UTF-8.
    pub fn from_bytes(
        id: impl Into<String>,
        text: &[u8],
        lang: impl Into<String>,
        source: impl Into<String>,
    ) -> Result<Self> {
        let id = id.into();
        let text = std::str::from_utf8(text)
            .map_err(|e| Error::InvalidDocument(format!("{id}: text is not valid UTF-8 ({e})")))?;
        Ok(Document::new(id, text, lang, source))
    }

    pub fn with_meta(mut self, key: &str, value: impl Into<MetaValue>) -> Self {
        self.meta.insert(key.to_string(), value.into());
        self
    }

    pub fn set_meta(&mut self, key: &str, value: impl Into<MetaValue>) {
        self.meta.insert(key.to_string(), value.into());
    }

    pub fn meta_f64(&self, key: &str) -> Option<f64> {
        self.meta.get(key).and_then(MetaValue::as_f64)
    }

    pub fn meta_str(&self, key: &str) -> Option<&str> {
        self.meta.get(key).and_then(MetaValue::as_str)
    }

    pub fn quality_label(&self) -> Result<Option<QualityLabel>> {
        self.closed_meta("quality_label")
    }

    pub fn ppl_bucket(&self) -> Result<Option<PplBucket>> {
        self.closed_meta("ppl_bucket")
    }

    fn closed_meta<T: FromStr<Err = Error>>(&self, key: &str) -> Result<Option<T>> {
        match self.meta.get(key) {
            None => Ok(None),
            Some(MetaValue::Str(s)) => s.parse().map(Some),
            Some(other) => Err(Error::InvalidDocument(format!(
                "{}: {key} must be a string, got {other:?}",
                self.id
            ))),
        }
    }

    /// Checks the record-level invariants (ids and text non-empty, closed
    /// enumerations respected, `dup_count` non-negative).
    pub fn validate(&self) -> Result<()> {
        if self.id.is_empty() {
            return Err(Error::InvalidDocument("empty id".into()));
        }
        if self.text.is_empty() {
            return Err(Error::InvalidDocument(format!("{}: empty text", self.id)));
        }
        self.quality_label()?;
        self.ppl_bucket()?;
        if let Some(v) = self.meta.get("dup_count") {
            match v {
                MetaValue::Int(n) if *n >= 0 => {}
                other => {
                    return Err(Error::InvalidDocument(format!(
                        "{}: dup_count must be a non-negative integer, got {other:?}",
                        self.id
                    )))
                }
            }
        }
        Ok(())
    }
}

#[derive(Deserialize)]
struct RawRecord {
    id: Option<String>,
    text: Option<String>,
    lang: Option<String>,
    source: Option<String>,
    #[serde(default)]
    meta: BTreeMap<String, MetaValue>,
}

fn parse_record(line: &[u8]) -> std::result::Result<Document, String> {
    let line = std::str::from_utf8(line).map_err(|e| format!("invalid UTF-8: {e}"))?;
    let raw: RawRecord = serde_json::from_str(line).map_err(|e| e.to_string())?;
    let field = |v: Option<String>, name: &str| v.ok_or_else(|| format!("missing `{name}` field"));
    let doc = Document {
        id: field(raw.id, "id")?,
        text: field(raw.text, "text")?,
        lang: field(raw.lang, "lang")?,
        source: field(raw.source, "source")?,
        meta: raw.meta,
    };
    doc.validate().map_err(|e| e.to_string())?;
    Ok(doc)
}

fn is_gzip(path: &Path) -> bool {
    path.extension().is_some_and(|e| e == "gz")
}

fn open_lines(path: &Path) -> Result<Box<dyn BufRead>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    if is_gzip(path) {
        Ok(Box::new(BufReader::new(MultiGzDecoder::new(file))))
    } else {
        Ok(Box::new(BufReader::new(file)))
    }
}

fn file_sha256(path: &Path) -> Result<(String, u64)> {
    let mut file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut hasher = Sha256::new();
    let mut buf = vec![0u8; 1 << 16];
    let mut total = 0u64;
    loop {
        let n = file.read(&mut buf).map_err(|e| Error::io(path, e))?;
        if n == 0 {
            break;
        }
        total += n as u64;
        hasher.update(&buf[..n]);
    }
    Ok((hex::encode(hasher.finalize()), total))
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardEntry {
    /// Path relative to the manifest directory.
    pub path: String,
    pub docs: u64,
    pub bytes: u64,
    pub sha256: String,
}

/// Ordered list of shards with per-shard counts and checksums.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShardManifest {
    pub version: u32,
    pub shards: Vec<ShardEntry>,
    #[serde(skip)]
    base_dir: PathBuf,
}

impl ShardManifest {
    pub fn empty(base_dir: impl Into<PathBuf>) -> Self {
        ShardManifest {
            version: 1,
            shards: Vec::new(),
            base_dir: base_dir.into(),
        }
    }

    pub fn base_dir(&self) -> &Path {
        &self.base_dir
    }

    pub fn shard_path(&self, entry: &ShardEntry) -> PathBuf {
        self.base_dir.join(&entry.path)
    }

    pub fn total_docs(&self) -> u64 {
        self.shards.iter().map(|s| s.docs).sum()
    }

    /// Builds a manifest for explicit shard files, counting records and
    /// hashing each file. Shards are sorted lexicographically by path.
    pub fn from_files(base_dir: impl Into<PathBuf>, files: &[PathBuf]) -> Result<Self> {
        let base_dir = base_dir.into();
        let mut files = files.to_vec();
        files.sort();
        let mut manifest = ShardManifest::empty(base_dir.clone());
        for path in files {
            let full = if path.is_absolute() {
                path.clone()
            } else {
                base_dir.join(&path)
            };
            let mut docs = 0u64;
            let mut lines = open_lines(&full)?;
            let mut buf = Vec::new();
            loop {
                buf.clear();
                let n = lines
                    .read_until(b'\n', &mut buf)
                    .map_err(|e| Error::io(&full, e))?;
                if n == 0 {
                    break;
                }
                if !buf.iter().all(u8::is_ascii_whitespace) {
                    docs += 1;
                }
            }
            let (sha256, bytes) = file_sha256(&full)?;
            let rel = full
                .strip_prefix(&base_dir)
                .map(Path::to_path_buf)
                .unwrap_or(full.clone());
            manifest.shards.push(ShardEntry {
                path: rel.to_string_lossy().into_owned(),
                docs,
                bytes,
                sha256,
            });
        }
        Ok(manifest)
    }

    /// Scans a directory for `*.jsonl` / `*.jsonl.gz` shards.
    pub fn scan(dir: impl AsRef<Path>) -> Result<Self> {
        let dir = dir.as_ref();
        let mut files = Vec::new();
        for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
            let entry = entry.map_err(|e| Error::io(dir, e))?;
            let name = entry.file_name().to_string_lossy().into_owned();
            if name.ends_with(".jsonl") || name.ends_with(".jsonl.gz") {
                files.push(PathBuf::from(name));
            }
        }
        Self::from_files(dir, &files)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        let path = path.as_ref();
        let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
        let mut manifest: ShardManifest = serde_json::from_slice(&bytes)
            .map_err(|e| Error::data(format!("{}: bad manifest: {e}", path.display())))?;
        manifest.base_dir = path.parent().map(Path::to_path_buf).unwrap_or_default();
        Ok(manifest)
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("manifest serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }

    /// Resolves a CLI input: a manifest file, a directory (using its
    /// manifest if present, else scanning it), or a single shard file.
    pub fn open(input: impl AsRef<Path>) -> Result<Self> {
        let input = input.as_ref();
        if input.is_dir() {
            let manifest = input.join(MANIFEST_FILE);
            if manifest.exists() {
                Self::load(manifest)
            } else {
                Self::scan(input)
            }
        } else if input.extension().is_some_and(|e| e == "json") {
            Self::load(input)
        } else if input.exists() {
            let base = input.parent().map(Path::to_path_buf).unwrap_or_default();
            let name = PathBuf::from(input.file_name().unwrap_or_default());
            Self::from_files(base, &[name])
        } else {
            Err(Error::io(
                input,
                std::io::Error::new(std::io::ErrorKind::NotFound, "no such shard or directory"),
            ))
        }
    }

    /// Re-checks each shard's checksum and document count.
    pub fn verify(&self) -> Result<()> {
        let paths: Vec<PathBuf> = self.shards.iter().map(|s| self.shard_path(s)).collect();
        let fresh = Self::from_files(self.base_dir.clone(), &paths)?;
        for (want, got) in self.shards.iter().zip(&fresh.shards) {
            if want.sha256 != got.sha256 || want.docs != got.docs || want.bytes != got.bytes {
                return Err(Error::data(format!(
                    "shard {} does not match manifest (docs {} vs {}, sha256 {} vs {})",
                    want.path, want.docs, got.docs, want.sha256, got.sha256
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy)]
pub struct ReadOptions {
    /// Fail on the first malformed record instead of skipping it.
    pub strict: bool,
    /// Treat repeated ids as malformed. Keeps one hash per id in memory.
    pub unique_ids: bool,
}

impl Default for ReadOptions {
    fn default() -> Self {
        ReadOptions {
            strict: false,
            unique_ids: true,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct SkippedRecord {
    pub shard: String,
    pub line: usize,
    pub reason: String,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ReadReport {
    pub docs: u64,
    pub skipped: u64,
    /// First few skipped positions; the full count is in `skipped`.
    pub skipped_samples: Vec<SkippedRecord>,
}

const MAX_SKIP_SAMPLES: usize = 100;

/// Streams documents shard by shard in manifest order, holding one open
/// file at a time.
pub struct DocReader {
    manifest: ShardManifest,
    options: ReadOptions,
    shard_idx: usize,
    current: Option<(Box<dyn BufRead>, String)>,
    line_no: usize,
    buf: Vec<u8>,
    seen: HashSet<u64>,
    report: ReadReport,
    failed: bool,
}

impl DocReader {
    pub fn new(manifest: ShardManifest, options: ReadOptions) -> Self {
        DocReader {
            manifest,
            options,
            shard_idx: 0,
            current: None,
            line_no: 0,
            buf: Vec::new(),
            seen: HashSet::new(),
            report: ReadReport::default(),
            failed: false,
        }
    }

    pub fn report(&self) -> &ReadReport {
        &self.report
    }

    pub fn into_report(self) -> ReadReport {
        self.report
    }

    fn skip(&mut self, shard: String, line: usize, reason: String) -> Option<Error> {
        if self.options.strict {
            self.failed = true;
            return Some(Error::Malformed {
                shard,
                line,
                reason,
            });
        }
        self.report.skipped += 1;
        if self.report.skipped_samples.len() < MAX_SKIP_SAMPLES {
            self.report.skipped_samples.push(SkippedRecord {
                shard,
                line,
                reason,
            });
        }
        None
    }
}

fn id_hash(id: &str) -> u64 {
    crate::hashing::hash_bytes(id.as_bytes(), 0x6964_5f68_6173_6821)
}

impl Iterator for DocReader {
    type Item = Result<Document>;

    fn next(&mut self) -> Option<Self::Item> {
        if self.failed {
            return None;
        }
        loop {
            if self.current.is_none() {
                let entry = self.manifest.shards.get(self.shard_idx)?.clone();
                let path = self.manifest.shard_path(&entry);
                match open_lines(&path) {
                    Ok(reader) => self.current = Some((reader, entry.path.clone())),
                    Err(e) => {
                        self.failed = true;
                        return Some(Err(e));
                    }
                }
                self.line_no = 0;
            }
            let (reader, shard) = self.current.as_mut().expect("shard open");
            self.buf.clear();
            let n = match reader.read_until(b'\n', &mut self.buf) {
                Ok(n) => n,
                Err(e) => {
                    self.failed = true;
                    let path = self.manifest.base_dir.join(shard.as_str());
                    return Some(Err(Error::io(path, e)));
                }
            };
            if n == 0 {
                self.current = None;
                self.shard_idx += 1;
                continue;
            }
            self.line_no += 1;
            if self.buf.iter().all(u8::is_ascii_whitespace) {
                continue;
            }
            let shard = shard.clone();
            let line = self.line_no;
            match parse_record(&self.buf) {
                Ok(doc) => {
                    if self.options.unique_ids && !self.seen.insert(id_hash(&doc.id)) {
                        let reason = format!("duplicate id `{}`", doc.id);
                        if let Some(err) = self.skip(shard, line, reason) {
                            return Some(Err(err));
                        }
                        continue;
                    }
                    self.report.docs += 1;
                    return Some(Ok(doc));
                }
                Err(reason) => {
                    if let Some(err) = self.skip(shard, line, reason) {
                        return Some(Err(err));
                    }
                }
            }
        }
    }
}

pub fn read_stream(manifest: ShardManifest, options: ReadOptions) -> DocReader {
    DocReader::new(manifest, options)
}

#[derive(Debug, Clone)]
pub struct WriteOptions {
    pub shard_limit: usize,
    pub gzip: bool,
    pub prefix: String,
}

impl Default for WriteOptions {
    fn default() -> Self {
        WriteOptions {
            shard_limit: DEFAULT_SHARD_LIMIT,
            gzip: false,
            prefix: "shard".into(),
        }
    }
}

enum Sink {
    Plain(BufWriter<File>),
    Gzip(GzEncoder<BufWriter<File>>),
}

impl Sink {
    fn writer(&mut self) -> &mut dyn Write {
        match self {
            Sink::Plain(w) => w,
            Sink::Gzip(w) => w,
        }
    }

    fn finish(self) -> std::io::Result<()> {
        match self {
            Sink::Plain(mut w) => w.flush(),
            Sink::Gzip(w) => w.finish()?.flush(),
        }
    }
}

/// Writes documents into consecutive shards of at most `shard_limit`
/// records, then a `manifest.json`. On any error every file it created is
/// removed.
pub struct ShardWriter {
    dir: PathBuf,
    options: WriteOptions,
    created: Vec<PathBuf>,
    current: Option<(Sink, PathBuf, usize)>,
    shard_names: Vec<PathBuf>,
}

impl ShardWriter {
    pub fn create(dir: impl Into<PathBuf>, options: WriteOptions) -> Result<Self> {
        let dir = dir.into();
        if options.shard_limit == 0 {
            return Err(Error::config("shard limit must be > 0"));
        }
        fs::create_dir_all(&dir).map_err(|e| Error::io(&dir, e))?;
        Ok(ShardWriter {
            dir,
            options,
            created: Vec::new(),
            current: None,
            shard_names: Vec::new(),
        })
    }

    fn open_next(&mut self) -> Result<()> {
        let ext = if self.options.gzip {
            "jsonl.gz"
        } else {
            "jsonl"
        };
        let name = PathBuf::from(format!(
            "{}-{:05}.{ext}",
            self.options.prefix,
            self.shard_names.len()
        ));
        let path = self.dir.join(&name);
        let file = File::create(&path).map_err(|e| Error::io(&path, e))?;
        self.created.push(path.clone());
        self.shard_names.push(name);
        let buf = BufWriter::new(file);
        let sink = if self.options.gzip {
            Sink::Gzip(GzEncoder::new(buf, Compression::default()))
        } else {
            Sink::Plain(buf)
        };
        self.current = Some((sink, path, 0));
        Ok(())
    }

    fn close_current(&mut self) -> Result<()> {
        if let Some((sink, path, _)) = self.current.take() {
            sink.finish().map_err(|e| Error::io(&path, e))?;
        }
        Ok(())
    }

    pub fn push(&mut self, doc: &Document) -> Result<()> {
        let res = self.push_inner(doc);
        if res.is_err() {
            self.cleanup();
        }
        res
    }

    fn push_inner(&mut self, doc: &Document) -> Result<()> {
        doc.validate()?;
        let full = matches!(&self.current, Some((_, _, n)) if *n >= self.options.shard_limit);
        if full {
            self.close_current()?;
        }
        if self.current.is_none() {
            self.open_next()?;
        }
        let (sink, path, count) = self.current.as_mut().expect("shard open");
        let line = serde_json::to_string(doc).expect("document serializes");
        let w = sink.writer();
        w.write_all(line.as_bytes())
            .and_then(|_| w.write_all(b"\n"))
            .map_err(|e| Error::io(path.clone(), e))?;
        *count += 1;
        Ok(())
    }

    pub fn finish(mut self) -> Result<ShardManifest> {
        let res = self.finish_inner();
        if res.is_err() {
            self.cleanup();
        }
        res
    }

    fn finish_inner(&mut self) -> Result<ShardManifest> {
        self.close_current()?;
        let manifest = ShardManifest::from_files(self.dir.clone(), &self.shard_names)?;
        let path = self.dir.join(MANIFEST_FILE);
        self.created.push(path.clone());
        manifest.save(&path)?;
        Ok(manifest)
    }

    fn cleanup(&mut self) {
        self.current = None;
        for path in self.created.drain(..) {
            let _ = fs::remove_file(path);
        }
    }
}

/// Writes a document stream to `dir` and returns the resulting manifest.
pub fn write_stream<I>(
    docs: I,
    dir: impl Into<PathBuf>,
    options: WriteOptions,
) -> Result<ShardManifest>
where
    I: IntoIterator<Item = Document>,
{
    let mut writer = ShardWriter::create(dir, options)?;
    for doc in docs {
        writer.push(&doc)?;
    }
    writer.finish()
}

/// Machine-readable summary written by every pipeline run.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema_version: u32,
    pub command: String,
    pub config_hash: String,
    pub seed: u64,
    pub dry_run: bool,
    pub counters: BTreeMap<String, f64>,
    pub wall_time_secs: f64,
    #[serde(default, skip_serializing_if = "serde_json::Value::is_null")]
    pub details: serde_json::Value,
}

impl RunReport {
    pub const SCHEMA_VERSION: u32 = 1;

    pub fn new(command: &str, config_hash: &str, seed: u64) -> Self {
        RunReport {
            schema_version: Self::SCHEMA_VERSION,
            command: command.to_string(),
            config_hash: config_hash.to_string(),
            seed,
            ..Default::default()
        }
    }

    pub fn count(&mut self, key: &str, value: impl Into<f64>) {
        *self.counters.entry(key.to_string()).or_insert(0.0) += value.into();
    }

    pub fn save(&self, path: impl AsRef<Path>) -> Result<()> {
        let path = path.as_ref();
        let json = serde_json::to_string_pretty(self).expect("report serializes");
        fs::write(path, json + "\n").map_err(|e| Error::io(path, e))
    }
}

/// SHA-256 over the canonical JSON form of any serializable config.
pub fn config_hash<T: Serialize>(config: &T) -> String {
    let value = serde_json::to_value(config).expect("config serializes");
    let canonical = serde_json::to_string(&value).expect("value serializes");
    hex::encode(Sha256::digest(canonical.as_bytes()))
}

/// Reads every document of a manifest into memory, failing on the first
/// error.
pub fn read_all(
    manifest: ShardManifest,
    options: ReadOptions,
) -> Result<(Vec<Document>, ReadReport)> {
    let mut reader = DocReader::new(manifest, options);
    let mut docs = Vec::new();
    for doc in reader.by_ref() {
        docs.push(doc?);
    }
    Ok((docs, reader.into_report()))
}

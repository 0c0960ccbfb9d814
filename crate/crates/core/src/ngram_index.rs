//! Exact-match n-gram index: a suffix array over a normalized token
//! stream with a sentinel after every document.

use std::collections::{BTreeSet, HashMap};
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Document;
use crate::error::{Error, Result};
use crate::hashing;

pub const INDEX_MAGIC: &[u8; 8] = b"GPRNIDX1";
pub const INDEX_VERSION: u32 = 1;
pub const SENTINEL: u32 = u32::MAX;
pub const DEFAULT_MIN_QUERY_TOKENS: usize = 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TokenMode {
    Word,
    Byte,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct NormalizationSpec {
    pub mode: TokenMode,
    pub lowercase: bool,
    /// Word mode only: trim non-alphanumeric characters from both ends of
    /// each word, dropping words that become empty.
    pub strip_punctuation: bool,
}

impl Default for NormalizationSpec {
    fn default() -> Self {
        NormalizationSpec {
            mode: TokenMode::Word,
            lowercase: true,
            strip_punctuation: true,
        }
    }
}

impl NormalizationSpec {
    pub fn byte() -> Self {
        NormalizationSpec {
            mode: TokenMode::Byte,
            lowercase: true,
            strip_punctuation: false,
        }
    }

    fn flags(&self) -> u32 {
        (self.mode == TokenMode::Byte) as u32
            | (self.lowercase as u32) << 1
            | (self.strip_punctuation as u32) << 2
    }

    fn from_flags(flags: u32) -> Result<Self> {
        if flags > 7 {
            return Err(Error::data(format!(
                "unknown normalization flags {flags:#x}"
            )));
        }
        Ok(NormalizationSpec {
            mode: if flags & 1 == 1 {
                TokenMode::Byte
            } else {
                TokenMode::Word
            },
            lowercase: flags & 2 != 0,
            strip_punctuation: flags & 4 != 0,
        })
    }

    pub fn hash(&self) -> u64 {
        hashing::hash_bytes(format!("norm-v1:{}", self.flags()).as_bytes(), 0)
    }

    pub fn tokenizer_id(&self) -> &'static str {
        match self.mode {
            TokenMode::Word => "word",
            TokenMode::Byte => "byte",
        }
    }

    fn word<'a>(&self, raw: &'a str) -> std::borrow::Cow<'a, str> {
        let mut w: std::borrow::Cow<str> = if self.lowercase {
            raw.to_lowercase().into()
        } else {
            raw.into()
        };
        if self.strip_punctuation {
            let trimmed = w.trim_matches(|c: char| !c.is_alphanumeric());
            if trimmed.len() != w.len() {
                w = trimmed.to_string().into();
            }
        }
        w
    }

    /// Normalized words (word mode) of `text`.
    pub fn words(&self, text: &str) -> Vec<String> {
        text.split_whitespace()
            .flat_map(|raw| {
                // Lowercasing can introduce whitespace-free but splittable
                // output only in theory; re-split to stay idempotent.
                let w = self.word(raw);
                w.split_whitespace()
                    .map(|p| self.word(p).into_owned())
                    .filter(|p| !p.is_empty())
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    /// Canonical text form; `normalize(normalize(x)) == normalize(x)`.
    pub fn normalize(&self, text: &str) -> String {
        match self.mode {
            TokenMode::Word => self.words(text).join(" "),
            TokenMode::Byte => {
                let collapsed = text.split_whitespace().collect::<Vec<_>>().join(" ");
                if self.lowercase {
                    collapsed.to_lowercase()
                } else {
                    collapsed
                }
            }
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct MatchResult {
    pub count: u64,
    pub doc_ids: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub positions: Option<Vec<u64>>,
}

/// Immutable once built; all query methods take `&self`.
#[derive(Debug, Clone, PartialEq)]
pub struct NGramIndex {
    spec: NormalizationSpec,
    tokens: Vec<u32>,
    suffixes: Vec<u64>,
    doc_starts: Vec<u64>,
    doc_ids: Vec<String>,
    vocab: Vec<String>,
    lookup: HashMap<String, u32>,
    min_query_tokens: usize,
}

struct Builder {
    spec: NormalizationSpec,
    tokens: Vec<u32>,
    doc_starts: Vec<u64>,
    doc_ids: Vec<String>,
    vocab: Vec<String>,
    lookup: HashMap<String, u32>,
}

impl Builder {
    fn push(&mut self, id: &str, text: &str) -> Result<()> {
        self.doc_starts.push(self.tokens.len() as u64);
        self.doc_ids.push(id.to_string());
        match self.spec.mode {
            TokenMode::Byte => {
                let norm = self.spec.normalize(text);
                self.tokens.extend(norm.bytes().map(u32::from));
            }
            TokenMode::Word => {
                for w in self.spec.words(text) {
                    let next = self.vocab.len();
                    let id = match self.lookup.get(&w) {
                        Some(&id) => id,
                        None => {
                            if next >= SENTINEL as usize {
                                return Err(Error::data(
                                    "vocabulary exceeds the 32-bit token width; build sharded indexes",
                                ));
                            }
                            self.lookup.insert(w.clone(), next as u32);
                            self.vocab.push(w);
                            next as u32
                        }
                    };
                    self.tokens.push(id);
                }
            }
        }
        self.tokens.push(SENTINEL);
        Ok(())
    }
}

/// Suffix array by prefix doubling.
pub fn suffix_array(tokens: &[u32]) -> Vec<u64> {
    let n = tokens.len();
    let mut sa: Vec<u64> = (0..n as u64).collect();
    if n <= 1 {
        return sa;
    }
    let mut rank: Vec<u64> = tokens.iter().map(|&t| t as u64).collect();
    let mut next = vec![0u64; n];
    let mut k = 1usize;
    loop {
        let key = |i: u64| {
            let i = i as usize;
            (rank[i], if i + k < n { rank[i + k] + 1 } else { 0 })
        };
        sa.par_sort_unstable_by_key(|&i| key(i));
        next[sa[0] as usize] = 0;
        for j in 1..n {
            let bump = (key(sa[j]) != key(sa[j - 1])) as u64;
            next[sa[j] as usize] = next[sa[j - 1] as usize] + bump;
        }
        std::mem::swap(&mut rank, &mut next);
        if rank[sa[n - 1] as usize] == n as u64 - 1 || k >= n {
            break;
        }
        k *= 2;
    }
    sa
}

pub fn build_index<I>(docs: I, spec: NormalizationSpec) -> Result<NGramIndex>
where
    I: IntoIterator<Item = Document>,
{
    let mut b = Builder {
        spec,
        tokens: Vec::new(),
        doc_starts: Vec::new(),
        doc_ids: Vec::new(),
        vocab: Vec::new(),
        lookup: HashMap::new(),
    };
    for doc in docs {
        b.push(&doc.id, &doc.text)?;
    }
    let suffixes = suffix_array(&b.tokens);
    Ok(NGramIndex {
        spec,
        tokens: b.tokens,
        suffixes,
        doc_starts: b.doc_starts,
        doc_ids: b.doc_ids,
        vocab: b.vocab,
        lookup: b.lookup,
        min_query_tokens: DEFAULT_MIN_QUERY_TOKENS,
    })
}

fn pad8(w: &mut impl Write, written: usize) -> std::io::Result<()> {
    let pad = (8 - written % 8) % 8;
    w.write_all(&[0u8; 8][..pad])
}

fn write_str(w: &mut impl Write, s: &str) -> std::io::Result<()> {
    w.write_all(&(s.len() as u32).to_le_bytes())?;
    w.write_all(s.as_bytes())?;
    pad8(w, 4 + s.len())
}

struct Cursor<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        let end = self
            .pos
            .checked_add(n)
            .filter(|&e| e <= self.bytes.len())
            .ok_or_else(|| Error::data("index file truncated"))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn align8(&mut self) -> Result<()> {
        let pad = (8 - self.pos % 8) % 8;
        self.take(pad).map(|_| ())
    }

    fn string(&mut self) -> Result<String> {
        let len = self.u32()? as usize;
        let s = std::str::from_utf8(self.take(len)?)
            .map_err(|_| Error::data("index string is not UTF-8"))?
            .to_string();
        self.align8()?;
        Ok(s)
    }
}

impl NGramIndex {
    pub fn spec(&self) -> NormalizationSpec {
        self.spec
    }

    pub fn tokenizer_id(&self) -> &'static str {
        self.spec.tokenizer_id()
    }

    pub fn num_positions(&self) -> usize {
        self.tokens.len()
    }

    pub fn num_docs(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn suffixes(&self) -> &[u64] {
        &self.suffixes
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn min_query_tokens(&self) -> usize {
        self.min_query_tokens
    }

    pub fn with_min_query_tokens(mut self, n: usize) -> Self {
        self.min_query_tokens = n.max(1);
        self
    }

    /// Query token ids, or `None` when a word is absent from the corpus.
    fn encode_query(&self, query: &str) -> Result<Option<Vec<u32>>> {
        let ids: Vec<Option<u32>> = match self.spec.mode {
            TokenMode::Byte => self
                .spec
                .normalize(query)
                .bytes()
                .map(|b| Some(b as u32))
                .collect(),
            TokenMode::Word => self
                .spec
                .words(query)
                .iter()
                .map(|w| self.lookup.get(w).copied())
                .collect(),
        };
        if ids.len() < self.min_query_tokens {
            return Err(Error::config(format!(
                "query has {} tokens after normalization; the minimum is {}",
                ids.len(),
                self.min_query_tokens
            )));
        }
        Ok(ids.into_iter().collect())
    }

    fn compare(&self, pos: u64, query: &[u32]) -> std::cmp::Ordering {
        let start = pos as usize;
        let end = (start + query.len()).min(self.tokens.len());
        self.tokens[start..end].cmp(query)
    }

    /// Suffix-array range whose suffixes start with `query`.
    fn range(&self, query: &[u32]) -> std::ops::Range<usize> {
        use std::cmp::Ordering::*;
        let lo = self
            .suffixes
            .partition_point(|&p| self.compare(p, query) == Less);
        let hi = lo + self.suffixes[lo..].partition_point(|&p| self.compare(p, query) == Equal);
        lo..hi
    }

    pub fn count_matches(&self, query: &str) -> Result<MatchResult> {
        let count = match self.encode_query(query)? {
            Some(q) => self.range(&q).len() as u64,
            None => 0,
        };
        Ok(MatchResult {
            count,
            ..Default::default()
        })
    }

    fn doc_of(&self, pos: u64) -> usize {
        self.doc_starts.partition_point(|&s| s <= pos) - 1
    }

    /// Ids of the documents containing the query, ascending, at most
    /// `limit`; also returns every match position, sorted.
    pub fn match_docs(&self, query: &str, limit: usize) -> Result<MatchResult> {
        let Some(q) = self.encode_query(query)? else {
            return Ok(MatchResult {
                positions: Some(Vec::new()),
                ..Default::default()
            });
        };
        let mut positions: Vec<u64> = self.suffixes[self.range(&q)].to_vec();
        positions.sort_unstable();
        let docs: BTreeSet<&str> = positions
            .iter()
            .map(|&p| self.doc_ids[self.doc_of(p)].as_str())
            .collect();
        Ok(MatchResult {
            count: positions.len() as u64,
            doc_ids: docs.into_iter().take(limit).map(String::from).collect(),
            positions: Some(positions),
        })
    }

    /// Decodes `len` tokens at `pos` back to normalized text.
    pub fn decode(&self, pos: u64, len: usize) -> String {
        let slice = &self.tokens[pos as usize..(pos as usize + len).min(self.tokens.len())];
        match self.spec.mode {
            TokenMode::Byte => {
                String::from_utf8_lossy(&slice.iter().map(|&t| t as u8).collect::<Vec<_>>())
                    .into_owned()
            }
            TokenMode::Word => slice
                .iter()
                .map(|&t| {
                    if t == SENTINEL {
                        "\u{0}"
                    } else {
                        self.vocab[t as usize].as_str()
                    }
                })
                .collect::<Vec<_>>()
                .join(" "),
        }
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        self.write_to(&mut w).map_err(|e| Error::io(path, e))?;
        w.flush().map_err(|e| Error::io(path, e))
    }

    fn write_to(&self, w: &mut impl Write) -> std::io::Result<()> {
        w.write_all(INDEX_MAGIC)?;
        w.write_all(&INDEX_VERSION.to_le_bytes())?;
        w.write_all(&self.spec.flags().to_le_bytes())?;
        w.write_all(&self.spec.hash().to_le_bytes())?;
        write_str(w, self.tokenizer_id())?;
        for n in [self.tokens.len(), self.doc_ids.len(), self.vocab.len()] {
            w.write_all(&(n as u64).to_le_bytes())?;
        }
        let mut buf = Vec::with_capacity(self.tokens.len() * 4);
        for t in &self.tokens {
            buf.extend_from_slice(&t.to_le_bytes());
        }
        w.write_all(&buf)?;
        pad8(w, buf.len())?;
        buf.clear();
        for p in self.suffixes.iter().chain(&self.doc_starts) {
            buf.extend_from_slice(&p.to_le_bytes());
        }
        w.write_all(&buf)?;
        for s in self.doc_ids.iter().chain(&self.vocab) {
            write_str(w, s)?;
        }
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes).map_err(|e| Error::data(format!("{}: {e}", path.display())))
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut c = Cursor { bytes, pos: 0 };
        if c.take(8)? != INDEX_MAGIC {
            return Err(Error::data("not an n-gram index"));
        }
        let version = c.u32()?;
        if version != INDEX_VERSION {
            return Err(Error::data(format!("unsupported index version {version}")));
        }
        let spec = NormalizationSpec::from_flags(c.u32()?)?;
        if c.u64()? != spec.hash() {
            return Err(Error::data("normalization hash mismatch"));
        }
        if c.string()? != spec.tokenizer_id() {
            return Err(Error::data("tokenizer id mismatch"));
        }
        let (n, docs, vocab_len) = (c.u64()? as usize, c.u64()? as usize, c.u64()? as usize);
        let tokens: Vec<u32> = c
            .take(
                n.checked_mul(4)
                    .ok_or_else(|| Error::data("index too large"))?,
            )?
            .chunks_exact(4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .collect();
        c.align8()?;
        let mut read_u64s = |k: usize| -> Result<Vec<u64>> {
            Ok(c.take(
                k.checked_mul(8)
                    .ok_or_else(|| Error::data("index too large"))?,
            )?
            .chunks_exact(8)
            .map(|b| u64::from_le_bytes(b.try_into().unwrap()))
            .collect())
        };
        let suffixes = read_u64s(n)?;
        let doc_starts = read_u64s(docs)?;
        let doc_ids = (0..docs).map(|_| c.string()).collect::<Result<Vec<_>>>()?;
        let vocab = (0..vocab_len)
            .map(|_| c.string())
            .collect::<Result<Vec<_>>>()?;
        if suffixes.iter().any(|&p| p as usize >= n) || doc_starts.iter().any(|&p| p as usize > n) {
            return Err(Error::data("index positions out of range"));
        }
        let lookup = vocab
            .iter()
            .enumerate()
            .map(|(i, w)| (w.clone(), i as u32))
            .collect();
        Ok(NGramIndex {
            spec,
            tokens,
            suffixes,
            doc_starts,
            doc_ids,
            vocab,
            lookup,
            min_query_tokens: DEFAULT_MIN_QUERY_TOKENS,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text, "en", "web")
    }

    fn naive_count(texts: &[&str], spec: &NormalizationSpec, query: &str) -> u64 {
        let q = spec.words(query);
        texts
            .iter()
            .map(|t| {
                let w = spec.words(t);
                w.windows(q.len())
                    .filter(|win| *win == q.as_slice())
                    .count() as u64
            })
            .sum()
    }

    #[test]
    fn empty_corpus() {
        let idx = build_index(Vec::new(), NormalizationSpec::default()).unwrap();
        assert_eq!(idx.num_positions(), 0);
        assert_eq!(idx.count_matches("a b c d e f g h").unwrap().count, 0);
    }

    #[test]
    fn small_corpus_counts() {
        let idx = build_index(vec![doc("d", "a b a b a")], NormalizationSpec::default())
            .unwrap()
            .with_min_query_tokens(2);
        assert_eq!(idx.num_positions(), 6);
        assert_eq!(idx.count_matches("a b").unwrap().count, 2);
        assert_eq!(idx.count_matches("A, b!").unwrap().count, 2);
        assert_eq!(idx.count_matches("b a").unwrap().count, 2);
    }

    #[test]
    fn sentinel_blocks_cross_doc() {
        let idx = build_index(
            vec![doc("1", "x y"), doc("2", "z w")],
            NormalizationSpec::default(),
        )
        .unwrap()
        .with_min_query_tokens(2);
        assert_eq!(idx.count_matches("y z").unwrap().count, 0);
    }

    #[test]
    fn short_query_rejected() {
        let idx = build_index(vec![doc("1", "x y")], NormalizationSpec::default()).unwrap();
        let err = idx.count_matches("x y").unwrap_err();
        assert!(err.to_string().contains("minimum is 8"));
    }

    #[test]
    fn match_docs_ascending_and_limited() {
        let q = "one two three four five six seven eight";
        let docs = vec![
            doc("d5", &format!("pre {q} post")),
            doc("d1", "nothing here"),
            doc("d2", &format!("{q} and {q}")),
        ];
        let idx = build_index(docs, NormalizationSpec::default()).unwrap();
        let r = idx.match_docs(q, 10).unwrap();
        assert_eq!(r.count, 3);
        assert_eq!(r.doc_ids, vec!["d2", "d5"]);
        for &p in r.positions.as_ref().unwrap() {
            assert_eq!(idx.decode(p, 8), q);
        }
        assert_eq!(idx.match_docs(q, 1).unwrap().doc_ids, vec!["d2"]);
        assert!(idx
            .match_docs("absent words are here but not there at all", 5)
            .unwrap()
            .doc_ids
            .is_empty());
    }

    #[test]
    fn byte_mode() {
        let idx = build_index(
            vec![doc("a", "Hello   World hello world")],
            NormalizationSpec::byte(),
        )
        .unwrap()
        .with_min_query_tokens(3);
        assert_eq!(idx.count_matches("hello world").unwrap().count, 2);
        assert_eq!(idx.count_matches("o w").unwrap().count, 2);
    }

    #[test]
    fn save_load_roundtrip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("i.idx");
        let idx = build_index(
            vec![doc("a", "the cat sat on the mat"), doc("bb", "the cat ran")],
            NormalizationSpec::default(),
        )
        .unwrap();
        idx.save(&path).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"GPRNIDX1");
        let back = NGramIndex::load(&path).unwrap();
        assert_eq!(back, idx);
        assert!(NGramIndex::from_bytes(&bytes[..bytes.len() - 3]).is_err());
    }

    fn is_sorted_sa(tokens: &[u32], sa: &[u64]) -> bool {
        sa.windows(2)
            .all(|w| tokens[w[0] as usize..] < tokens[w[1] as usize..])
    }

    proptest! {
        #[test]
        fn suffix_array_is_sorted_permutation(tokens in prop::collection::vec(0u32..4, 0..200)) {
            let sa = suffix_array(&tokens);
            let mut seen = sa.clone();
            seen.sort_unstable();
            prop_assert_eq!(seen, (0..tokens.len() as u64).collect::<Vec<_>>());
            prop_assert!(is_sorted_sa(&tokens, &sa));
        }

        #[test]
        fn counts_match_naive(
            texts in prop::collection::vec(prop::collection::vec(prop::sample::select(vec!["a", "b", "c", "D,"]), 0..40), 1..6),
            start in 0usize..40, len in 1usize..5, pick in 0usize..6,
        ) {
            let texts: Vec<String> = texts.iter().map(|t| t.join(" ")).collect();
            let refs: Vec<&str> = texts.iter().map(|s| s.as_str()).collect();
            let spec = NormalizationSpec::default();
            let src = &texts[pick % texts.len()];
            let words: Vec<&str> = src.split_whitespace().collect();
            let query = if words.is_empty() {
                "a".to_string()
            } else {
                let s = start % words.len();
                words[s..(s + len).min(words.len())].join(" ")
            };
            let idx = build_index(
                refs.iter().enumerate().map(|(i, t)| doc(&i.to_string(), t)),
                spec,
            ).unwrap().with_min_query_tokens(1);
            let n = spec.words(&query).len();
            let extended = format!("{query} a");
            prop_assert_eq!(idx.count_matches(&query).unwrap().count, naive_count(&refs, &spec, &query));
            if n > 0 {
                prop_assert!(idx.count_matches(&extended).unwrap().count <= idx.count_matches(&query).unwrap().count);
            }
        }

        #[test]
        fn normalization_idempotent(s in "\\PC{0,60}") {
            for spec in [NormalizationSpec::default(), NormalizationSpec::byte()] {
                let once = spec.normalize(&s);
                prop_assert_eq!(spec.normalize(&once), once);
            }
        }
    }
}

//! MinHash/LSH near-deduplication: word shingling with text
//! normalization, 16×8 banded signatures, union-find clustering with
//! smallest-id representatives, and split-then-global execution.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus_io::Document;
use crate::error::{Error, Result};
use crate::hashing::{fmix64, hash_bytes, splitmix64};

pub const NUM_BANDS: usize = 16;
pub const ROWS_PER_BAND: usize = 8;
pub const NUM_HASHES: usize = NUM_BANDS * ROWS_PER_BAND;
pub const DEFAULT_SHINGLE_SIZE: usize = 13;
pub const DEFAULT_SPLITS: usize = 10;

const SHINGLE_SEED: u64 = 0x7368_696e_676c_6531;
const PARTITION_SEED: u64 = 0x7370_6c69_7473_3130;
const CACHE_MAGIC: &[u8; 8] = b"GPRNSIG1";
const CACHE_VERSION: u16 = 1;

const WEEKDAYS_MONTHS: &[&str] = &[
    "monday",
    "tuesday",
    "wednesday",
    "thursday",
    "friday",
    "saturday",
    "sunday",
    "january",
    "february",
    "march",
    "april",
    "may",
    "june",
    "july",
    "august",
    "september",
    "october",
    "november",
    "december",
    "lundi",
    "mardi",
    "mercredi",
    "jeudi",
    "vendredi",
    "samedi",
    "dimanche",
    "janvier",
    "février",
    "mars",
    "avril",
    "mai",
    "juin",
    "juillet",
    "août",
    "septembre",
    "octobre",
    "novembre",
    "décembre",
];

/// Text normalization and shingle width.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ShingleConfig {
    pub shingle_size: usize,
    pub lowercase: bool,
    pub collapse_whitespace: bool,
    /// Trim punctuation from both ends of each word.
    pub strip_punctuation: bool,
    /// Replace every digit with `0`.
    pub normalize_digits: bool,
    /// Remove words found in `patterns`.
    pub strip_patterns: bool,
    pub patterns: Vec<String>,
}

impl Default for ShingleConfig {
    fn default() -> Self {
        ShingleConfig {
            shingle_size: DEFAULT_SHINGLE_SIZE,
            lowercase: true,
            collapse_whitespace: true,
            strip_punctuation: true,
            normalize_digits: true,
            strip_patterns: true,
            patterns: WEEKDAYS_MONTHS.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl ShingleConfig {
    pub fn validate(&self) -> Result<()> {
        if self.shingle_size == 0 {
            return Err(Error::config("shingle_size must be >= 1"));
        }
        if self.patterns.iter().any(String::is_empty) {
            return Err(Error::config("dedup patterns must be non-empty"));
        }
        Ok(())
    }

    /// Stable fingerprint stored alongside signatures.
    pub fn fingerprint(&self) -> u64 {
        let json = serde_json::to_string(self).expect("config serializes");
        hash_bytes(json.as_bytes(), 0)
    }

    pub fn normalize(&self, text: &str) -> Vec<String> {
        let patterns: HashSet<String> = if self.strip_patterns {
            self.patterns.iter().map(|p| p.to_lowercase()).collect()
        } else {
            HashSet::new()
        };
        let raw: Vec<&str> = if self.collapse_whitespace {
            text.split_whitespace().collect()
        } else {
            text.split(' ').collect()
        };
        raw.into_iter()
            .filter_map(|w| {
                let mut w = if self.strip_punctuation {
                    w.trim_matches(|c: char| !c.is_alphanumeric()).to_string()
                } else {
                    w.to_string()
                };
                if self.lowercase {
                    w = w.to_lowercase();
                }
                if self.normalize_digits {
                    w = w
                        .chars()
                        .map(|c| if c.is_ascii_digit() { '0' } else { c })
                        .collect();
                }
                if w.is_empty() && self.collapse_whitespace {
                    return None;
                }
                if patterns.contains(&w.to_lowercase()) {
                    return None;
                }
                Some(w)
            })
            .collect()
    }
}

/// Sorted, deduplicated 64-bit shingle hashes.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct ShingleSet(pub Vec<u64>);

impl ShingleSet {
    pub fn from_hashes(mut hashes: Vec<u64>) -> Self {
        hashes.sort_unstable();
        hashes.dedup();
        ShingleSet(hashes)
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn jaccard(&self, other: &ShingleSet) -> f64 {
        let (mut i, mut j, mut inter) = (0, 0, 0usize);
        while i < self.0.len() && j < other.0.len() {
            match self.0[i].cmp(&other.0[j]) {
                std::cmp::Ordering::Less => i += 1,
                std::cmp::Ordering::Greater => j += 1,
                std::cmp::Ordering::Equal => {
                    inter += 1;
                    i += 1;
                    j += 1;
                }
            }
        }
        let union = self.0.len() + other.0.len() - inter;
        if union == 0 {
            1.0
        } else {
            inter as f64 / union as f64
        }
    }
}

fn hash_words(words: &[String]) -> u64 {
    hash_bytes(words.join(" ").as_bytes(), SHINGLE_SEED)
}

/// Word-level shingles of the normalized text. Texts shorter than the
/// shingle size become a single shingle.
pub fn shingle_text(text: &str, cfg: &ShingleConfig) -> ShingleSet {
    let words = cfg.normalize(text);
    let k = cfg.shingle_size.max(1);
    if words.len() < k {
        return ShingleSet(vec![hash_words(&words)]);
    }
    ShingleSet::from_hashes(words.windows(k).map(hash_words).collect())
}

pub fn shingle(doc: &Document, cfg: &ShingleConfig) -> ShingleSet {
    shingle_text(&doc.text, cfg)
}

/// 128 seeded hash functions, `h_i(x) = fmix64(x ^ key_i)`, with keys
/// drawn from a counter-based mixer so a single seed reproduces the family.
#[derive(Debug, Clone)]
pub struct HashFamily {
    seed: u64,
    keys: [u64; NUM_HASHES],
}

impl HashFamily {
    pub fn new(seed: u64) -> Self {
        let mut keys = [0u64; NUM_HASHES];
        for (i, k) in keys.iter_mut().enumerate() {
            *k = splitmix64(seed.wrapping_add(splitmix64(i as u64)));
        }
        HashFamily { seed, keys }
    }

    pub fn seed(&self) -> u64 {
        self.seed
    }

    pub fn signature(&self, shingles: &ShingleSet) -> Result<[u64; NUM_HASHES]> {
        if shingles.is_empty() {
            return Err(Error::data("cannot sign an empty shingle set"));
        }
        let mut mins = [u64::MAX; NUM_HASHES];
        for &x in &shingles.0 {
            for (slot, key) in mins.iter_mut().zip(&self.keys) {
                let h = fmix64(x ^ key);
                if h < *slot {
                    *slot = h;
                }
            }
        }
        Ok(mins)
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct MinHashSignature {
    pub id: String,
    pub seed: u64,
    pub config_fingerprint: u64,
    pub values: [u64; NUM_HASHES],
}

impl MinHashSignature {
    pub fn band(&self, b: usize) -> &[u64] {
        &self.values[b * ROWS_PER_BAND..(b + 1) * ROWS_PER_BAND]
    }

    fn band_keys(&self) -> Vec<BandKey> {
        (0..NUM_BANDS)
            .map(|b| {
                let mut rows = [0u64; ROWS_PER_BAND];
                rows.copy_from_slice(self.band(b));
                (b as u8, rows)
            })
            .collect()
    }
}

type BandKey = (u8, [u64; ROWS_PER_BAND]);

/// Signs one shingle set.
pub fn signature(
    id: &str,
    shingles: &ShingleSet,
    family: &HashFamily,
    cfg: &ShingleConfig,
) -> Result<MinHashSignature> {
    Ok(MinHashSignature {
        id: id.to_string(),
        seed: family.seed(),
        config_fingerprint: cfg.fingerprint(),
        values: family.signature(shingles)?,
    })
}

/// Index pairs `(i, j)`, `i < j`, of items sharing at least one band key.
fn band_candidates(items: &[Vec<BandKey>]) -> Vec<(usize, usize)> {
    let mut buckets: HashMap<&BandKey, Vec<usize>> = HashMap::new();
    for (idx, keys) in items.iter().enumerate() {
        for key in keys {
            let members = buckets.entry(key).or_default();
            if members.last() != Some(&idx) {
                members.push(idx);
            }
        }
    }
    let mut pairs = HashSet::new();
    for members in buckets.values() {
        for (a, &i) in members.iter().enumerate() {
            for &j in &members[a + 1..] {
                pairs.insert((i.min(j), i.max(j)));
            }
        }
    }
    let mut pairs: Vec<_> = pairs.into_iter().collect();
    pairs.sort_unstable();
    pairs
}

/// Emits each pair of signatures that agrees exactly on at least one of
/// the 16 bands, once, as index pairs into `signatures`.
pub fn lsh_candidates(signatures: &[MinHashSignature]) -> Result<Vec<(usize, usize)>> {
    if let Some(first) = signatures.first() {
        if let Some(odd) = signatures
            .iter()
            .find(|s| s.seed != first.seed || s.config_fingerprint != first.config_fingerprint)
        {
            return Err(Error::data(format!(
                "signature `{}` was built with a different seed or shingle config than `{}`",
                odd.id, first.id
            )));
        }
    }
    let keys: Vec<Vec<BandKey>> = signatures.iter().map(MinHashSignature::band_keys).collect();
    Ok(band_candidates(&keys))
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub struct UnionFind {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl UnionFind {
    pub fn new(n: usize) -> Self {
        UnionFind {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClusterRecord {
    pub id: String,
    pub cluster_id: usize,
    pub dup_count: u64,
    pub kept: bool,
}

/// Every input document mapped to a cluster; cluster ids are assigned in
/// ascending order of representative id.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct DupClusters {
    pub assignment: BTreeMap<String, usize>,
    pub representatives: Vec<String>,
    pub sizes: Vec<u64>,
}

impl DupClusters {
    pub fn cluster_of(&self, id: &str) -> Option<usize> {
        self.assignment.get(id).copied()
    }

    pub fn representative_of(&self, id: &str) -> Option<&str> {
        self.cluster_of(id)
            .map(|c| self.representatives[c].as_str())
    }

    pub fn num_clusters(&self) -> usize {
        self.representatives.len()
    }

    pub fn records(&self) -> Vec<ClusterRecord> {
        self.assignment
            .iter()
            .map(|(id, &c)| ClusterRecord {
                id: id.clone(),
                cluster_id: c,
                dup_count: self.sizes[c],
                kept: self.representatives[c] == *id,
            })
            .collect()
    }

    /// Tab-separated `id, cluster_id, dup_count, kept` with a header row.
    pub fn write_report(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            writeln!(w, "id\tcluster_id\tdup_count\tkept")?;
            for r in self.records() {
                writeln!(
                    w,
                    "{}\t{}\t{}\t{}",
                    r.id, r.cluster_id, r.dup_count, r.kept as u8
                )?;
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    fn from_groups(groups: Vec<(String, Vec<String>, u64)>) -> Self {
        let mut groups = groups;
        groups.sort_by(|a, b| a.0.cmp(&b.0));
        let mut out = DupClusters::default();
        for (c, (rep, members, size)) in groups.into_iter().enumerate() {
            for m in members {
                out.assignment.insert(m, c);
            }
            out.representatives.push(rep);
            out.sizes.push(size);
        }
        out
    }
}

#[derive(Debug, Clone)]
pub struct DedupOutcome {
    pub clusters: DupClusters,
    /// Representatives in input order, each with `meta.dup_count`.
    pub survivors: Vec<Document>,
}

impl DedupOutcome {
    pub fn removed(&self) -> usize {
        self.clusters.assignment.len() - self.survivors.len()
    }

    pub fn survivor_ids(&self) -> Vec<String> {
        let mut ids: Vec<_> = self.survivors.iter().map(|d| d.id.clone()).collect();
        ids.sort();
        ids
    }
}

/// Union-find closure over `pairs`; keeps the smallest id per cluster.
/// `weights[i]` is the number of original documents item `i` stands for.
fn cluster_indices(
    docs: Vec<Document>,
    weights: &[u64],
    pairs: &[(usize, usize)],
) -> (DupClusters, Vec<Document>, Vec<(usize, Vec<usize>)>) {
    let n = docs.len();
    let mut uf = UnionFind::new(n);
    for &(a, b) in pairs {
        uf.union(a, b);
    }
    let mut members: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        members.entry(uf.find(i)).or_default().push(i);
    }
    let mut rep_of_root = HashMap::new();
    let mut groups = Vec::with_capacity(members.len());
    let mut member_lists = Vec::with_capacity(members.len());
    for (root, idxs) in members {
        let rep = *idxs
            .iter()
            .min_by(|&&a, &&b| docs[a].id.cmp(&docs[b].id))
            .expect("non-empty");
        let size: u64 = idxs.iter().map(|&i| weights[i]).sum();
        rep_of_root.insert(root, (rep, size));
        groups.push((
            docs[rep].id.clone(),
            idxs.iter().map(|&i| docs[i].id.clone()).collect(),
            size,
        ));
        member_lists.push((rep, idxs));
    }
    let clusters = DupClusters::from_groups(groups);
    let mut survivors = Vec::new();
    for (i, mut doc) in docs.into_iter().enumerate() {
        let (rep, size) = rep_of_root[&uf.find(i)];
        if rep == i {
            doc.set_meta("dup_count", size);
            survivors.push(doc);
        }
    }
    (clusters, survivors, member_lists)
}

/// Clusters documents given candidate pairs of ids.
pub fn cluster_and_keep(pairs: &[(String, String)], docs: Vec<Document>) -> Result<DedupOutcome> {
    let index: HashMap<&str, usize> = docs
        .iter()
        .enumerate()
        .map(|(i, d)| (d.id.as_str(), i))
        .collect();
    let lookup = |id: &String| {
        index
            .get(id.as_str())
            .copied()
            .ok_or_else(|| Error::data(format!("candidate pair references unknown id `{id}`")))
    };
    let idx_pairs = pairs
        .iter()
        .map(|(a, b)| Ok((lookup(a)?, lookup(b)?)))
        .collect::<Result<Vec<_>>>()?;
    let weights = vec![1; docs.len()];
    let (clusters, survivors, _) = cluster_indices(docs, &weights, &idx_pairs);
    Ok(DedupOutcome {
        clusters,
        survivors,
    })
}

/// Which stage-one split a document id falls in.
pub fn split_of(id: &str, splits: usize) -> usize {
    (hash_bytes(id.as_bytes(), PARTITION_SEED) % splits.max(1) as u64) as usize
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct Deduplicator {
    pub shingle: ShingleConfig,
    pub seed: u64,
    /// Drop LSH candidates whose exact shingle Jaccard is below this.
    pub verify_threshold: Option<f64>,
    /// Let stage-two representatives carry the band keys of every member
    /// they absorbed in stage one, which makes the two-stage closure equal
    /// to the single-stage one.
    pub carry_member_bands: bool,
}

struct Item {
    doc: Document,
    weight: u64,
    keys: Vec<BandKey>,
    shingles: Option<ShingleSet>,
}

impl Deduplicator {
    pub fn new(seed: u64) -> Self {
        Deduplicator {
            seed,
            ..Default::default()
        }
    }

    pub fn family(&self) -> HashFamily {
        HashFamily::new(self.seed)
    }

    /// Signs documents in parallel; output order follows input order.
    pub fn signatures(&self, docs: &[Document]) -> Result<Vec<MinHashSignature>> {
        self.shingle.validate()?;
        let family = self.family();
        docs.par_iter()
            .map(|d| signature(&d.id, &shingle(d, &self.shingle), &family, &self.shingle))
            .collect()
    }

    fn items(&self, docs: Vec<Document>, cache: Option<&SignatureCache>) -> Result<Vec<Item>> {
        self.shingle.validate()?;
        if let Some(cache) = cache {
            cache.check(self)?;
        }
        let family = self.family();
        let keep_shingles = self.verify_threshold.is_some();
        docs.into_par_iter()
            .map(|doc| {
                let cached = cache.and_then(|c| c.get(&doc.id));
                let shingles = if keep_shingles || cached.is_none() {
                    Some(shingle(&doc, &self.shingle))
                } else {
                    None
                };
                let sig = match cached {
                    Some(values) => MinHashSignature {
                        id: doc.id.clone(),
                        seed: self.seed,
                        config_fingerprint: self.shingle.fingerprint(),
                        values: *values,
                    },
                    None => signature(
                        &doc.id,
                        shingles.as_ref().expect("computed"),
                        &family,
                        &self.shingle,
                    )?,
                };
                Ok(Item {
                    keys: sig.band_keys(),
                    weight: 1,
                    shingles: if keep_shingles { shingles } else { None },
                    doc,
                })
            })
            .collect()
    }

    fn run_stage(&self, items: Vec<Item>) -> (DupClusters, Vec<Item>) {
        let keys: Vec<Vec<BandKey>> = items.iter().map(|i| i.keys.clone()).collect();
        let mut pairs = band_candidates(&keys);
        if let Some(t) = self.verify_threshold {
            pairs.retain(|&(a, b)| match (&items[a].shingles, &items[b].shingles) {
                (Some(x), Some(y)) => x.jaccard(y) >= t,
                _ => true,
            });
        }
        let weights: Vec<u64> = items.iter().map(|i| i.weight).collect();
        let mut extras: Vec<Option<(Vec<BandKey>, Option<ShingleSet>)>> = items
            .iter()
            .map(|i| Some((i.keys.clone(), i.shingles.clone())))
            .collect();
        let docs: Vec<Document> = items.into_iter().map(|i| i.doc).collect();
        let id_to_idx: HashMap<String, usize> = docs
            .iter()
            .enumerate()
            .map(|(i, d)| (d.id.clone(), i))
            .collect();
        let (clusters, survivors, member_lists) = cluster_indices(docs, &weights, &pairs);

        let mut carried: HashMap<usize, Vec<BandKey>> = HashMap::new();
        if self.carry_member_bands {
            for (rep, idxs) in member_lists.iter().filter(|(_, m)| m.len() > 1) {
                let mut all: Vec<BandKey> = idxs
                    .iter()
                    .flat_map(|&i| extras[i].as_ref().map(|e| e.0.clone()).unwrap_or_default())
                    .collect();
                all.sort_unstable();
                all.dedup();
                carried.insert(*rep, all);
            }
        }
        let next = survivors
            .into_iter()
            .map(|doc| {
                let idx = id_to_idx[&doc.id];
                let (keys, shingles) = extras[idx].take().expect("survivor visited once");
                let weight = doc.meta_f64("dup_count").map(|v| v as u64).unwrap_or(1);
                Item {
                    keys: carried.remove(&idx).unwrap_or(keys),
                    weight,
                    shingles,
                    doc,
                }
            })
            .collect();
        (clusters, next)
    }

    pub fn single_stage(&self, docs: Vec<Document>) -> Result<DedupOutcome> {
        self.single_stage_cached(docs, None)
    }

    pub fn single_stage_cached(
        &self,
        docs: Vec<Document>,
        cache: Option<&SignatureCache>,
    ) -> Result<DedupOutcome> {
        let items = self.items(docs, cache)?;
        let (clusters, survivors) = self.run_stage(items);
        Ok(DedupOutcome {
            clusters,
            survivors: survivors.into_iter().map(|i| i.doc).collect(),
        })
    }

    /// Stage one dedups each `hash(id) mod splits` partition on its own;
    /// stage two dedups the union of stage-one survivors.
    pub fn two_stage(&self, docs: Vec<Document>, splits: usize) -> Result<DedupOutcome> {
        self.two_stage_cached(docs, splits, None)
    }

    pub fn two_stage_cached(
        &self,
        docs: Vec<Document>,
        splits: usize,
        cache: Option<&SignatureCache>,
    ) -> Result<DedupOutcome> {
        if splits == 0 {
            return Err(Error::config("splits must be >= 1"));
        }
        let items = self.items(docs, cache)?;
        let mut parts: Vec<Vec<Item>> = (0..splits).map(|_| Vec::new()).collect();
        for item in items {
            parts[split_of(&item.doc.id, splits)].push(item);
        }
        let stage_one: Vec<(DupClusters, Vec<Item>)> =
            parts.into_par_iter().map(|p| self.run_stage(p)).collect();

        // original id -> stage-one representative id
        let mut first_rep: BTreeMap<String, String> = BTreeMap::new();
        let mut merged = Vec::new();
        for (clusters, survivors) in stage_one {
            for (id, c) in clusters.assignment {
                first_rep.insert(id, clusters.representatives[c].clone());
            }
            merged.extend(survivors);
        }
        let (global, survivors) = self.run_stage(merged);

        let mut groups: BTreeMap<String, Vec<String>> = BTreeMap::new();
        for (id, rep1) in first_rep {
            let rep = global
                .representative_of(&rep1)
                .expect("stage-one rep in stage two")
                .to_string();
            groups.entry(rep).or_default().push(id);
        }
        let groups = groups
            .into_iter()
            .map(|(rep, members)| {
                let size = members.len() as u64;
                (rep, members, size)
            })
            .collect();
        Ok(DedupOutcome {
            clusters: DupClusters::from_groups(groups),
            survivors: survivors.into_iter().map(|i| i.doc).collect(),
        })
    }
}

/// Two-stage dedup with default settings and the given seed.
pub fn two_stage_dedup(docs: Vec<Document>, splits: usize, seed: u64) -> Result<DedupOutcome> {
    Deduplicator::new(seed).two_stage(docs, splits)
}

/// Signatures persisted between runs, keyed by document id.
#[derive(Debug, Clone, Default)]
pub struct SignatureCache {
    pub seed: u64,
    pub shingle_size: u32,
    pub config_fingerprint: u64,
    pub entries: BTreeMap<String, [u64; NUM_HASHES]>,
}

impl SignatureCache {
    pub fn from_signatures(dedup: &Deduplicator, sigs: &[MinHashSignature]) -> Self {
        SignatureCache {
            seed: dedup.seed,
            shingle_size: dedup.shingle.shingle_size as u32,
            config_fingerprint: dedup.shingle.fingerprint(),
            entries: sigs.iter().map(|s| (s.id.clone(), s.values)).collect(),
        }
    }

    pub fn get(&self, id: &str) -> Option<&[u64; NUM_HASHES]> {
        self.entries.get(id)
    }

    pub fn check(&self, dedup: &Deduplicator) -> Result<()> {
        if self.seed != dedup.seed || self.config_fingerprint != dedup.shingle.fingerprint() {
            return Err(Error::data(
                "signature cache was built with a different seed or shingle config",
            ));
        }
        Ok(())
    }

    /// Layout, all little-endian: magic `GPRNSIG1`, u16 version, u16 zero,
    /// u32 shingle size, u64 seed, u64 config fingerprint, u64 record count;
    /// then per record u32 id length, id bytes zero-padded to 8, and 128 u64
    /// hash values.
    pub fn save(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut write = || -> std::io::Result<()> {
            w.write_all(CACHE_MAGIC)?;
            w.write_all(&CACHE_VERSION.to_le_bytes())?;
            w.write_all(&0u16.to_le_bytes())?;
            w.write_all(&self.shingle_size.to_le_bytes())?;
            w.write_all(&self.seed.to_le_bytes())?;
            w.write_all(&self.config_fingerprint.to_le_bytes())?;
            w.write_all(&(self.entries.len() as u64).to_le_bytes())?;
            for (id, values) in &self.entries {
                let bytes = id.as_bytes();
                w.write_all(&(bytes.len() as u32).to_le_bytes())?;
                w.write_all(bytes)?;
                let pad = (8 - (4 + bytes.len()) % 8) % 8;
                w.write_all(&[0u8; 8][..pad])?;
                for v in values {
                    w.write_all(&v.to_le_bytes())?;
                }
            }
            w.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let file = File::open(path).map_err(|e| Error::io(path, e))?;
        let mut r = BufReader::new(file);
        let bad = |m: &str| Error::data(format!("{}: {m}", path.display()));
        let io = |e| Error::io(path, e);
        let mut magic = [0u8; 8];
        r.read_exact(&mut magic).map_err(io)?;
        if &magic != CACHE_MAGIC {
            return Err(bad("not a signature cache"));
        }
        let mut b2 = [0u8; 2];
        let mut b4 = [0u8; 4];
        let mut b8 = [0u8; 8];
        r.read_exact(&mut b2).map_err(io)?;
        if u16::from_le_bytes(b2) != CACHE_VERSION {
            return Err(bad("unsupported signature cache version"));
        }
        r.read_exact(&mut b2).map_err(io)?;
        r.read_exact(&mut b4).map_err(io)?;
        let shingle_size = u32::from_le_bytes(b4);
        r.read_exact(&mut b8).map_err(io)?;
        let seed = u64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        let config_fingerprint = u64::from_le_bytes(b8);
        r.read_exact(&mut b8).map_err(io)?;
        let count = u64::from_le_bytes(b8);
        let mut entries = BTreeMap::new();
        for _ in 0..count {
            r.read_exact(&mut b4).map_err(io)?;
            let len = u32::from_le_bytes(b4) as usize;
            let mut id = vec![0u8; len];
            r.read_exact(&mut id).map_err(io)?;
            let pad = (8 - (4 + len) % 8) % 8;
            r.read_exact(&mut [0u8; 8][..pad]).map_err(io)?;
            let id = String::from_utf8(id).map_err(|_| bad("id is not UTF-8"))?;
            let mut values = [0u64; NUM_HASHES];
            for v in values.iter_mut() {
                r.read_exact(&mut b8).map_err(io)?;
                *v = u64::from_le_bytes(b8);
            }
            entries.insert(id, values);
        }
        Ok(SignatureCache {
            seed,
            shingle_size,
            config_fingerprint,
            entries,
        })
    }
}

/// Probability that two sets of Jaccard similarity `s` share at least one
/// band under 16×8 banding.
pub fn band_collision_probability(s: f64) -> f64 {
    1.0 - (1.0 - s.powi(ROWS_PER_BAND as i32)).powi(NUM_BANDS as i32)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn words(n: usize) -> String {
        (0..n)
            .map(|i| format!("w{i}"))
            .collect::<Vec<_>>()
            .join(" ")
    }

    fn doc(id: &str, text: &str) -> Document {
        Document::new(id, text, "fr", "rpv2")
    }

    #[test]
    fn shingle_counts() {
        let cfg = ShingleConfig::default();
        assert_eq!(shingle_text(&words(13), &cfg).len(), 1);
        assert_eq!(shingle_text(&words(15), &cfg).len(), 3);
        assert_eq!(shingle_text(&words(5), &cfg).len(), 1);
    }

    #[test]
    fn weekday_and_month_names_are_ignored() {
        let cfg = ShingleConfig::default();
        let a = "Publié le lundi 3 mars 2021 par la rédaction du journal local de la ville";
        let b = "Publié le jeudi 3 mars 2021 par la rédaction du journal local de la ville";
        assert_eq!(shingle_text(a, &cfg), shingle_text(b, &cfg));
        let raw = ShingleConfig {
            strip_patterns: false,
            ..Default::default()
        };
        assert_ne!(shingle_text(a, &raw), shingle_text(b, &raw));
    }

    #[test]
    fn invalid_shingle_config() {
        let cfg = ShingleConfig {
            shingle_size: 0,
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
        let cfg = ShingleConfig {
            patterns: vec![String::new()],
            ..Default::default()
        };
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn signatures_are_deterministic() {
        let cfg = ShingleConfig::default();
        let fam = HashFamily::new(42);
        let s = shingle_text(&words(40), &cfg);
        let a = signature("a", &s, &fam, &cfg).unwrap();
        let b = signature("b", &s, &fam, &cfg).unwrap();
        assert_eq!(a.values, b.values);
        assert!(fam.signature(&ShingleSet::default()).is_err());
    }

    #[test]
    fn lsh_basic_cases() {
        let cfg = ShingleConfig::default();
        let fam = HashFamily::new(1);
        let s1 = shingle_text(&words(40), &cfg);
        let s2 = shingle_text("completely different words in this other text here", &cfg);
        let sigs = vec![
            signature("a", &s1, &fam, &cfg).unwrap(),
            signature("b", &s1, &fam, &cfg).unwrap(),
            signature("c", &s2, &fam, &cfg).unwrap(),
        ];
        assert_eq!(lsh_candidates(&sigs).unwrap(), vec![(0, 1)]);
        assert!(lsh_candidates(&sigs[..1]).unwrap().is_empty());

        let other = signature("d", &s1, &HashFamily::new(2), &cfg).unwrap();
        assert!(lsh_candidates(&[sigs[0].clone(), other]).is_err());
    }

    #[test]
    fn transitive_cluster() {
        let docs = vec![doc("c", "x"), doc("a", "y"), doc("b", "z"), doc("d", "w")];
        let pairs = vec![
            ("a".to_string(), "b".to_string()),
            ("b".to_string(), "c".to_string()),
        ];
        let out = cluster_and_keep(&pairs, docs).unwrap();
        assert_eq!(out.survivor_ids(), vec!["a", "d"]);
        let a = out.survivors.iter().find(|d| d.id == "a").unwrap();
        assert_eq!(a.meta_f64("dup_count"), Some(3.0));
        assert_eq!(out.clusters.representative_of("c"), Some("a"));
        assert_eq!(out.clusters.num_clusters(), 2);
    }

    #[test]
    fn no_pairs_is_identity() {
        let docs = vec![doc("b", "x"), doc("a", "y")];
        let out = cluster_and_keep(&[], docs).unwrap();
        let ids: Vec<_> = out.survivors.iter().map(|d| d.id.as_str()).collect();
        assert_eq!(ids, vec!["b", "a"]);
        assert!(out
            .survivors
            .iter()
            .all(|d| d.meta_f64("dup_count") == Some(1.0)));
    }

    #[test]
    fn unknown_id_in_pair() {
        let pairs = vec![("a".to_string(), "zz".to_string())];
        assert!(cluster_and_keep(&pairs, vec![doc("a", "x")]).is_err());
    }

    #[test]
    fn zero_splits_rejected() {
        assert!(Deduplicator::default()
            .two_stage(vec![doc("a", "x")], 0)
            .is_err());
    }

    #[test]
    fn signature_cache_round_trip() {
        let dedup = Deduplicator::new(9);
        let docs = vec![doc("a", &words(30)), doc("bb", &words(20))];
        let sigs = dedup.signatures(&docs).unwrap();
        let cache = SignatureCache::from_signatures(&dedup, &sigs);
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("sig.bin");
        cache.save(&path).unwrap();
        let back = SignatureCache::load(&path).unwrap();
        assert_eq!(back.entries, cache.entries);
        assert_eq!(back.shingle_size, 13);
        back.check(&dedup).unwrap();
        assert!(back.check(&Deduplicator::new(10)).is_err());
        let bytes = std::fs::read(&path).unwrap();
        assert_eq!(&bytes[..8], b"GPRNSIG1");
        // header 40 bytes; "a" record 8 + 1024; "bb" record 8 + 1024
        assert_eq!(bytes.len(), 40 + 2 * (8 + 1024));
        let cached = dedup
            .single_stage_cached(docs.clone(), Some(&back))
            .unwrap();
        assert_eq!(
            cached.survivor_ids(),
            dedup.single_stage(docs).unwrap().survivor_ids()
        );
    }

    #[test]
    fn collision_curve_values() {
        assert!((band_collision_probability(0.5) - 0.0607).abs() < 1e-3);
        assert!((band_collision_probability(0.9) - 0.99988).abs() < 1e-5);
    }
}

//! Deterministic synthetic corpora and benchmark fixtures.

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use crate::audit::{BenchmarkSample, BenchmarkSet};
use crate::corpus_io::Document;
use crate::dedup::ShingleSet;
use crate::filtering::{ENGLISH_STOPWORDS, FRENCH_STOPWORDS};

const ONSETS: &[&str] = &[
    "b", "c", "d", "f", "g", "l", "m", "n", "p", "r", "s", "t", "v", "br", "tr", "pl", "ch",
];
const VOWELS: &[&str] = &["a", "e", "i", "o", "u", "ou", "ai", "ea"];
const CODAS: &[&str] = &["", "", "", "n", "r", "s", "l", "t"];

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// A pronounceable pseudo-word of 1 to 4 syllables.
pub fn pseudo_word<R: Rng + ?Sized>(rng: &mut R) -> String {
    let syllables = rng.gen_range(1..=4);
    let mut w = String::new();
    for _ in 0..syllables {
        w.push_str(ONSETS.choose(rng).unwrap());
        w.push_str(VOWELS.choose(rng).unwrap());
        w.push_str(CODAS.choose(rng).unwrap());
    }
    w
}

/// Fixed content vocabulary for a seed.
pub fn vocabulary(size: usize, seed: u64) -> Vec<String> {
    let mut r = rng(seed);
    (0..size).map(|_| pseudo_word(&mut r)).collect()
}

fn stopwords(lang: &str) -> &'static [&'static str] {
    if lang == "fr" {
        FRENCH_STOPWORDS
    } else {
        ENGLISH_STOPWORDS
    }
}

/// Prose with roughly 40% stopwords, sentences of 8 to 20 words and a
/// line break every few sentences.
pub fn prose<R: Rng + ?Sized>(rng: &mut R, vocab: &[String], lang: &str, words: usize) -> String {
    let stops = stopwords(lang);
    let mut out = String::with_capacity(words * 7);
    let mut in_sentence = 0;
    let mut sentence_len = rng.gen_range(8..=20);
    let mut sentences = 0;
    for i in 0..words {
        let w: &str = if rng.gen_bool(0.4) {
            stops.choose(rng).unwrap()
        } else {
            vocab.choose(rng).unwrap()
        };
        if in_sentence == 0 {
            let mut c = w.chars();
            let first = c.next().unwrap();
            out.extend(first.to_uppercase());
            out.push_str(c.as_str());
        } else {
            out.push_str(w);
        }
        in_sentence += 1;
        if in_sentence == sentence_len || i + 1 == words {
            out.push('.');
            in_sentence = 0;
            sentence_len = rng.gen_range(8..=20);
            sentences += 1;
            if i + 1 < words {
                out.push(if sentences % 3 == 0 { '\n' } else { ' ' });
            }
        } else {
            out.push(' ');
        }
    }
    out
}

fn junk<R: Rng + ?Sized>(rng: &mut R, vocab: &[String]) -> String {
    match rng.gen_range(0..4) {
        0 => (0..rng.gen_range(5..30))
            .map(|_| vocab.choose(rng).unwrap().as_str())
            .collect::<Vec<_>>()
            .join(" "),
        1 => (0..80)
            .map(|_| {
                format!(
                    "{}$$ ## {}!!",
                    vocab.choose(rng).unwrap(),
                    rng.gen_range(0..1000)
                )
            })
            .collect::<Vec<_>>()
            .join(" "),
        2 => {
            let line = (0..8)
                .map(|_| vocab.choose(rng).unwrap().as_str())
                .collect::<Vec<_>>()
                .join(" ");
            vec![line; 12].join("\n")
        }
        _ => (0..15)
            .map(|_| {
                let l = (0..6)
                    .map(|_| vocab.choose(rng).unwrap().as_str())
                    .collect::<Vec<_>>()
                    .join(" ");
                format!("{l}...")
            })
            .collect::<Vec<_>>()
            .join("\n"),
    }
}

/// Replaces `edits` random words with fresh ones.
pub fn perturb<R: Rng + ?Sized>(rng: &mut R, text: &str, vocab: &[String], edits: usize) -> String {
    let mut words: Vec<String> = text.split(' ').map(String::from).collect();
    for _ in 0..edits {
        let i = rng.gen_range(0..words.len());
        words[i] = vocab.choose(rng).unwrap().clone();
    }
    words.join(" ")
}

/// Mixed-quality web-like corpus: clean prose, junk, near and exact
/// duplicates, with perplexity and quality labels in `meta`.
pub fn corpus(n: usize, seed: u64) -> Vec<Document> {
    let mut r = rng(seed);
    let vocab_en = vocabulary(2000, seed ^ 0x5eed_0001);
    let vocab_fr = vocabulary(2000, seed ^ 0x5eed_0002);
    let mut docs: Vec<Document> = Vec::with_capacity(n);
    for i in 0..n {
        let lang = if r.gen_bool(0.6) { "en" } else { "fr" };
        let vocab = if lang == "en" { &vocab_en } else { &vocab_fr };
        let roll: f64 = r.gen();
        let clean_before: Vec<usize> = if roll >= 0.85 {
            (0..docs.len())
                .filter(|&j| docs[j].meta_str("kind") == Some("clean"))
                .collect()
        } else {
            Vec::new()
        };
        let (kind, text, lang) = if roll < 0.7 || (roll >= 0.85 && clean_before.is_empty()) {
            let words = r.gen_range(80..400);
            ("clean", prose(&mut r, vocab, lang, words), lang.to_string())
        } else if roll < 0.85 {
            ("junk", junk(&mut r, vocab), lang.to_string())
        } else {
            let src = &docs[*clean_before.choose(&mut r).unwrap()];
            let text = if roll < 0.95 {
                let v = if src.lang == "en" {
                    &vocab_en
                } else {
                    &vocab_fr
                };
                perturb(&mut r, &src.text, v, 1)
            } else {
                src.text.clone()
            };
            ("dup", text, src.lang.clone())
        };
        let ppl = ["head", "head", "middle", "middle", "tail"]
            .choose(&mut r)
            .unwrap();
        let quality = ["low", "low", "medium", "medium", "high", "high", "high"]
            .choose(&mut r)
            .unwrap();
        let doc = Document::new(
            format!("doc-{i:06}"),
            text,
            lang.clone(),
            format!("web-{lang}"),
        )
        .with_meta("kind", kind.to_string())
        .with_meta("ppl_bucket", ppl.to_string())
        .with_meta("quality_label", quality.to_string());
        docs.push(doc);
    }
    docs
}

/// Two shingle sets of `size` elements each whose Jaccard similarity is
/// as close to `s` as integer counts allow; returns the realized value.
pub fn jaccard_pair<R: Rng + ?Sized>(
    rng: &mut R,
    size: usize,
    s: f64,
) -> (ShingleSet, ShingleSet, f64) {
    let inter = ((2.0 * size as f64 * s) / (1.0 + s)).round() as usize;
    let inter = inter.min(size);
    let mut fresh = std::collections::HashSet::with_capacity(2 * size);
    let mut draw = |rng: &mut R| loop {
        let v: u64 = rng.gen();
        if fresh.insert(v) {
            return v;
        }
    };
    let common: Vec<u64> = (0..inter).map(|_| draw(rng)).collect();
    let mut a = common.clone();
    let mut b = common;
    a.extend((inter..size).map(|_| draw(rng)));
    b.extend((inter..size).map(|_| draw(rng)));
    let realized = inter as f64 / (2 * size - inter) as f64;
    (
        ShingleSet::from_hashes(a),
        ShingleSet::from_hashes(b),
        realized,
    )
}

fn question<R: Rng + ?Sized>(rng: &mut R, vocab: &[String], words: usize) -> String {
    let body = (0..words)
        .map(|_| vocab.choose(rng).unwrap().as_str())
        .collect::<Vec<_>>()
        .join(" ");
    format!("Which of the following best describes the {body}?")
}

/// Multiple-choice benchmark with `n` samples cycling through `categories`.
pub fn benchmark(name: &str, n: usize, categories: &[&str], seed: u64) -> BenchmarkSet {
    let mut r = rng(seed);
    let vocab = vocabulary(3000, seed ^ 0xbe4c);
    let samples = (0..n)
        .map(|i| BenchmarkSample {
            id: format!("{name}-{i:04}"),
            question: {
                let len = r.gen_range(10..18);
                question(&mut r, &vocab, len)
            },
            choices: (0..4)
                .map(|_| {
                    question(&mut r, &vocab, 3)
                        .replace("Which of the following best describes the ", "")
                })
                .collect(),
            answer: Value::from(r.gen_range(0..4u64)),
            category: categories
                .get(i % categories.len().max(1))
                .map(|c| c.to_string()),
            subset: Some("test".into()),
        })
        .collect();
    BenchmarkSet {
        name: name.into(),
        samples,
    }
}

/// Word problems whose answer is a worked solution rather than a choice.
pub fn word_problems(name: &str, n: usize, seed: u64) -> BenchmarkSet {
    let mut r = rng(seed);
    let vocab = vocabulary(1000, seed ^ 0x9a);
    let samples = (0..n)
        .map(|i| {
            let (a, b) = (r.gen_range(2..50u64), r.gen_range(2..50u64));
            let thing = vocab.choose(&mut r).unwrap();
            BenchmarkSample {
                id: format!("{name}-{i:04}"),
                question: format!(
                    "A shop sells {a} boxes of {thing} each morning and {b} boxes each evening. How many boxes of {thing} does it sell in one day?"
                ),
                choices: vec![],
                answer: Value::from(format!("It sells {a} + {b} = {} boxes. #### {}", a + b, a + b)),
                category: Some("arithmetic".into()),
                subset: Some("test".into()),
            }
        })
        .collect();
    BenchmarkSet {
        name: name.into(),
        samples,
    }
}

pub const MMLU_SUBJECTS: [&str; 5] = [
    "anatomy",
    "computer_security",
    "high_school_geography",
    "moral_scenarios",
    "college_physics",
];

/// The 35-needle haystack configuration: 15 multiple-choice items (three
/// per subject), 10 word problems and 10 graduate-level items.
pub fn biahs_benchmarks(seed: u64) -> Vec<BenchmarkSet> {
    vec![
        benchmark("mmlu", 15, &MMLU_SUBJECTS, seed),
        word_problems("gsm8k", 10, seed.wrapping_add(1)),
        benchmark(
            "gpqa",
            10,
            &["biology", "chemistry", "physics"],
            seed.wrapping_add(2),
        ),
    ]
}

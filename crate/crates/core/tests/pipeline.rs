use std::collections::{BTreeMap, HashSet};

use gprn_core::audit::{contamination_rate, split_benchmark, ContaminationOptions};
use gprn_core::corpus_io::{read_all, write_stream, ReadOptions, WriteOptions};
use gprn_core::dedup::Deduplicator;
use gprn_core::filtering::{bucket_gate, enrich, heuristic_filter, FilterConfig};
use gprn_core::mixing::{run_schedule, MixSchedule, SourceRegistry, VecSource};
use gprn_core::ngram_index::{build_index, NGramIndex, NormalizationSpec};
use gprn_core::packing::{
    read_sequences, shuffle_buffer_write, tokenize, ByteTokenizer, PackConfig, Packer,
};
use gprn_core::{synth, Document, ShardManifest};

fn curate(n: usize, seed: u64) -> (Vec<Document>, usize) {
    let cfg = FilterConfig::default();
    let mut gated = Vec::new();
    for doc in synth::corpus(n, seed) {
        let doc = enrich(doc, &cfg).unwrap();
        if !heuristic_filter(&doc, &cfg, true).unwrap().is_keep() {
            continue;
        }
        let mut doc = doc;
        if bucket_gate(&mut doc).unwrap().keep {
            gated.push(doc);
        }
    }
    let before = gated.len();
    let out = Deduplicator::new(seed).two_stage(gated, 4).unwrap();
    (out.survivors, before)
}

#[test]
fn curated_corpus_survives_a_shard_round_trip() {
    let (survivors, before) = curate(600, 4);
    assert!(!survivors.is_empty() && survivors.len() < before);
    let represented: f64 = survivors
        .iter()
        .map(|d| d.meta_f64("dup_count").unwrap())
        .sum();
    assert_eq!(represented as usize, before);
    assert!(survivors.iter().all(|d| d.meta_str("bucket").is_some()));

    let dir = tempfile::tempdir().unwrap();
    let opts = WriteOptions {
        shard_limit: 37,
        gzip: true,
        ..Default::default()
    };
    let manifest = write_stream(survivors.clone(), dir.path().join("out"), opts).unwrap();
    assert_eq!(manifest.total_docs() as usize, survivors.len());
    let reopened = ShardManifest::open(dir.path().join("out")).unwrap();
    reopened.verify().unwrap();
    let (back, report) = read_all(reopened, ReadOptions::default()).unwrap();
    assert_eq!(back, survivors);
    assert_eq!(report.skipped, 0);
}

#[test]
fn mixed_stream_packs_without_losing_tokens() {
    let (survivors, _) = curate(400, 9);
    let (en, fr): (Vec<_>, Vec<_>) = survivors.into_iter().partition(|d| d.lang == "en");
    let schedule = MixSchedule::from_toml(
        r#"
        seed = 3
        [[phases]]
        name = "a"
        tokens = 40000
        weights = { en = 3, fr = 1 }
        [[phases]]
        name = "b"
        tokens = 20000
        weights = { en = 1, fr = 3 }
        "#,
    )
    .unwrap();
    let mut sources: SourceRegistry = BTreeMap::new();
    sources.insert("en".into(), Box::new(VecSource::new(en)));
    sources.insert("fr".into(), Box::new(VecSource::new(fr)));
    let mut mixed = Vec::new();
    let report = run_schedule(&schedule, &mut sources, &ByteTokenizer, |m| {
        mixed.push(m.doc);
        Ok(())
    })
    .unwrap();
    assert_eq!(report.phases.len(), 2);
    assert!(report.phases.iter().all(|p| p.tokens >= p.budget));

    let dir = tempfile::tempdir().unwrap();
    let shard = dir.path().join("tokens.bin");
    let seqs = mixed.iter().map(|d| tokenize(d, &ByteTokenizer));
    let rng = synth::rng(1);
    shuffle_buffer_write(seqs, 16, rng, &shard).unwrap();
    let stored = read_sequences(&shard).unwrap();
    assert_eq!(stored.len(), mixed.len());
    let total: u64 = stored.iter().map(|(_, t)| t.len() as u64).sum();
    assert_eq!(total, report.total_tokens);

    let mut packer = Packer::new(PackConfig {
        seq_len: 512,
        group_size: 20,
    })
    .unwrap();
    let mut out = 0u64;
    for (_, tokens) in &stored {
        packer
            .push(tokens, &mut |s| {
                assert_eq!(s.len(), 512);
                out += 512;
                Ok(())
            })
            .unwrap();
    }
    let r = packer.finish();
    assert_eq!(r.tokens_in, total);
    assert_eq!(r.tokens_emitted, out);
    assert_eq!(r.tokens_in, r.tokens_emitted + r.tokens_wasted);
}

#[test]
fn saved_index_flags_planted_benchmark_items() {
    let mut docs = synth::corpus(300, 2);
    let bench = synth::benchmark("quiz", 40, &synth::MMLU_SUBJECTS, 5);
    let planted: HashSet<&str> = bench.samples[..6].iter().map(|s| s.id.as_str()).collect();
    for s in &bench.samples[..6] {
        docs.push(Document::new(
            format!("leak-{}", s.id),
            format!("Question of the day: {} Answer below.", s.question),
            "en",
            "web-en",
        ));
    }
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("index.bin");
    build_index(docs, NormalizationSpec::default())
        .unwrap()
        .save(&path)
        .unwrap();
    let idx = NGramIndex::load(&path).unwrap();
    let report = contamination_rate(&idx, &bench, &ContaminationOptions::default()).unwrap();
    assert_eq!(report.leaked, 6);
    assert_eq!(report.leak_rate, 0.15);
    let splits = split_benchmark(&report, &bench).unwrap();
    let contaminated: HashSet<&str> = splits.contaminated.ids().collect();
    assert_eq!(contaminated, planted);
    assert_eq!(splits.clean.len(), 34);
}

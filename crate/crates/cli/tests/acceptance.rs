//! Acceptance checks. Each criterion prints one PASS or FAIL line with the
//! measured values; the process exits non-zero if any criterion fails.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::time::Instant;

use gprn_core::audit::{
    biahs_run, contamination_rate, median, render_needles, score_gap, split_benchmark,
    ContaminationOptions,
};
use gprn_core::dedup::{
    band_collision_probability, shingle, signature, Deduplicator, HashFamily, ShingleConfig,
    NUM_BANDS,
};
use gprn_core::filtering::{FnScorer, RandomScorer, Scorer};
use gprn_core::game::{solve_equilibrium, DetectionFn, GameParams, Regime};
use gprn_core::mixing::{
    bundled_8b_schedule, inject, run_schedule, schedule_poison, MultinomialSampler, PoisonDoc,
    SourceRegistry, VecSource,
};
use gprn_core::ngram_index::{build_index, NGramIndex, NormalizationSpec};
use gprn_core::packing::{ByteTokenizer, PackConfig, Packer};
use gprn_core::{synth, Document};
use rand::seq::SliceRandom;
use rand::Rng;
use statrs::distribution::{ChiSquared, ContinuousCDF};

type Check = Result<String, String>;
type Criterion = (&'static str, fn() -> Check);

fn ensure(cond: bool, msg: impl FnOnce() -> String) -> Result<(), String> {
    if cond {
        Ok(())
    } else {
        Err(msg())
    }
}

fn e2s<E: std::fmt::Display>(e: E) -> String {
    e.to_string()
}

fn lsh_s_curve() -> Check {
    const PAIRS: usize = 4000;
    let start = Instant::now();
    let family = HashFamily::new(17);
    let cfg = ShingleConfig::default();
    let mut rng = synth::rng(1);
    let mut parts = Vec::new();
    let mut worst = 0.0f64;
    for s in [0.5, 0.7, 0.9] {
        let mut hits = 0usize;
        for i in 0..PAIRS {
            let (a, b, _) = synth::jaccard_pair(&mut rng, 300, s);
            let sa = signature(&format!("a{i}"), &a, &family, &cfg).map_err(e2s)?;
            let sb = signature(&format!("b{i}"), &b, &family, &cfg).map_err(e2s)?;
            hits += (0..NUM_BANDS).any(|k| sa.band(k) == sb.band(k)) as usize;
        }
        let rate = hits as f64 / PAIRS as f64;
        let expected = band_collision_probability(s);
        worst = worst.max((rate - expected).abs());
        parts.push(format!("s={s}: {rate:.4} vs {expected:.4}"));
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!("{} ({PAIRS} pairs each, {secs:.1}s)", parts.join(", "));
    ensure(worst <= 0.03, || {
        format!("{detail}; max deviation {worst:.4} > 0.03")
    })?;
    ensure(secs < 60.0, || format!("{detail}; slower than 60s"))?;
    Ok(detail)
}

fn dedup_end_to_end() -> Check {
    const BASE: usize = 9000;
    const PLANTED: usize = 1000;
    let mut rng = synth::rng(2);
    let vocab = synth::vocabulary(3000, 2);
    let texts: Vec<String> = (0..BASE)
        .map(|_| synth::prose(&mut rng, &vocab, "en", 400))
        .collect();
    let mut slots: Vec<usize> = (0..BASE + PLANTED).collect();
    slots.shuffle(&mut rng);
    let id = |slot: usize| format!("doc-{slot:05}");
    let mut docs: Vec<Document> = Vec::with_capacity(BASE + PLANTED);
    let mut partners = Vec::new();
    let cfg = ShingleConfig::default();
    let mut min_planted = 1.0f64;
    for (i, text) in texts.iter().enumerate() {
        let doc = Document::new(id(slots[i]), text.clone(), "en", "web");
        if i < PLANTED {
            let near = synth::perturb(&mut rng, text, &vocab, 1);
            let dup = Document::new(id(slots[BASE + i]), near, "en", "web");
            let j = shingle(&doc, &cfg).jaccard(&shingle(&dup, &cfg));
            min_planted = min_planted.min(j);
            partners.push((doc.id.clone(), dup.id.clone()));
            docs.push(dup);
        }
        docs.push(doc);
    }
    ensure(min_planted >= 0.9, || {
        format!("planted pair Jaccard {min_planted} < 0.9")
    })?;

    // The unrelated population must actually sit at Jaccard <= 0.1.
    let shingles: HashMap<String, _> = docs
        .iter()
        .map(|d| (d.id.clone(), shingle(d, &cfg)))
        .collect();
    let partner_of: HashMap<&str, &str> = partners
        .iter()
        .flat_map(|(a, b)| [(a.as_str(), b.as_str()), (b.as_str(), a.as_str())])
        .collect();
    let mut max_unrelated = 0.0f64;
    for _ in 0..20_000 {
        let a = docs[rng.gen_range(0..docs.len())].id.as_str();
        let b = docs[rng.gen_range(0..docs.len())].id.as_str();
        if a != b && partner_of.get(a) != Some(&b) {
            max_unrelated = max_unrelated.max(shingles[a].jaccard(&shingles[b]));
        }
    }
    ensure(max_unrelated <= 0.1, || {
        format!("sampled unrelated pair at Jaccard {max_unrelated}")
    })?;

    let d = Deduplicator::new(3);
    let single = d.single_stage(docs.clone()).map_err(e2s)?;
    let two = d.two_stage(docs, 10).map_err(e2s)?;
    let rep = |a: &str| two.clusters.representative_of(a).map(String::from);
    let found = partners.iter().filter(|(a, b)| rep(a) == rep(b)).count();
    let recall = found as f64 / PLANTED as f64;

    let mut members: HashMap<String, Vec<&str>> = HashMap::new();
    for id in shingles.keys() {
        let id = id.as_str();
        members
            .entry(rep(id).unwrap_or_default())
            .or_default()
            .push(id);
    }
    let mut false_merges = 0u64;
    for ids in members.values() {
        for (i, a) in ids.iter().enumerate() {
            for b in &ids[i + 1..] {
                if partner_of.get(a) != Some(b) {
                    false_merges += 1;
                }
            }
        }
    }
    let n = (BASE + PLANTED) as u64;
    let unrelated = n * (n - 1) / 2 - PLANTED as u64;
    let fm_rate = false_merges as f64 / unrelated as f64;
    let same = single.survivor_ids() == two.survivor_ids();
    let detail = format!(
        "recall {recall:.4} ({found}/{PLANTED}), false merges {false_merges}/{unrelated} ({fm_rate:.2e}), \
         min planted J {min_planted:.3}, survivors two-stage {} single-stage {} equal={same}",
        two.survivors.len(),
        single.survivors.len()
    );
    ensure(recall >= 0.99 && fm_rate <= 0.01 && same, || detail.clone())?;
    Ok(detail)
}

fn packing_waste() -> Check {
    let cfg = PackConfig {
        seq_len: 4096,
        group_size: 8192,
    };
    let source: Vec<u32> = (0..10_000u32).map(|i| i % 50_000).collect();
    let mut worst = 0.0f64;
    let mut lines = Vec::new();
    for seed in 0..3u64 {
        let mut rng = synth::rng(100 + seed);
        let docs = 20_000 + rng.gen_range(0..2000);
        let mut packer = Packer::new(cfg).map_err(e2s)?;
        let mut emitted = 0u64;
        let mut lengths = 0u64;
        let mut emit = |s: &[u32]| {
            emitted += s.len() as u64;
            Ok(())
        };
        for _ in 0..docs {
            let len = rng.gen_range(2000..=8100);
            lengths += len as u64;
            packer.push(&source[..len], &mut emit).map_err(e2s)?;
        }
        let r = packer.finish();
        let mean = lengths as f64 / docs as f64;
        ensure(mean >= 5000.0, || format!("mean doc length {mean}"))?;
        ensure(
            r.tokens_in == lengths
                && r.tokens_in == r.tokens_emitted + r.tokens_wasted
                && emitted == r.tokens_emitted,
            || format!("conservation broken: {r:?}, counted {lengths} in, {emitted} out"),
        )?;
        worst = worst.max(r.waste_ratio);
        lines.push(format!("{:.2e}", r.waste_ratio));
    }
    let detail = format!(
        "waste ratios [{}] over 3 runs (mean doc > 5000 tokens), conservation exact",
        lines.join(", ")
    );
    ensure(worst <= 1e-4, || detail.clone())?;
    Ok(detail)
}

fn mixer() -> Check {
    let start = Instant::now();
    let schedule = bundled_8b_schedule();
    let naive = &schedule.phases[0];
    let sampler = MultinomialSampler::new(&naive.weights).map_err(e2s)?;
    let probs = sampler.probabilities();
    let mut counts = vec![0u64; probs.len()];
    const DRAWS: u64 = 1_000_000;
    for i in 0..DRAWS {
        counts[sampler.draw(schedule.seed, i)] += 1;
    }
    let mut chi2 = 0.0;
    let mut df = 0usize;
    for (&p, &c) in probs.iter().zip(&counts) {
        if p == 0.0 {
            ensure(c == 0, || "zero-weight source drawn".into())?;
            continue;
        }
        let e = p * DRAWS as f64;
        chi2 += (c as f64 - e).powi(2) / e;
        df += 1;
    }
    let p_value = 1.0 - ChiSquared::new((df - 1) as f64).map_err(e2s)?.cdf(chi2);

    // Scaled five-phase run with fixed 200-token documents.
    let scaled = bundled_8b_schedule().scaled(5e4);
    let names: HashSet<&String> = scaled
        .phases
        .iter()
        .flat_map(|p| p.weights.keys())
        .collect();
    let mut sources: SourceRegistry = BTreeMap::new();
    for name in names {
        let docs = (0..50)
            .map(|i| Document::new(format!("{name}-{i}"), "x".repeat(200), "en", name.as_str()))
            .collect();
        sources.insert(name.clone(), Box::new(VecSource::new(docs)));
    }
    let report = run_schedule(&scaled, &mut sources, &ByteTokenizer, |_| Ok(())).map_err(e2s)?;
    let mut worst = (0.0f64, String::new());
    for (phase, pr) in scaled.phases.iter().zip(&report.phases) {
        for (name, &w) in &phase.weights {
            let dev = (100.0 * pr.source_share(name) - w).abs();
            if dev > worst.0 {
                worst = (dev, format!("{}/{}", phase.name, name));
            }
        }
    }
    let secs = start.elapsed().as_secs_f64();
    let detail = format!(
        "chi2={chi2:.2} df={} p={p_value:.4}; five phases {} tokens, max share deviation {:.3} points ({}); {secs:.1}s",
        df - 1,
        report.total_tokens,
        worst.0,
        worst.1
    );
    ensure(p_value > 0.001 && worst.0 <= 2.0 && secs < 120.0, || {
        detail.clone()
    })?;
    Ok(detail)
}

/// Occurrences of `query` inside each document's normalized word list.
fn naive_count(corpus: &[Vec<String>], query: &[String]) -> u64 {
    if query.is_empty() {
        return 0;
    }
    corpus
        .iter()
        .map(|words| words.windows(query.len()).filter(|w| *w == query).count() as u64)
        .sum()
}

fn prose_corpus(bytes: usize, vocab_size: usize, seed: u64) -> Vec<Document> {
    let mut rng = synth::rng(seed);
    let vocab = synth::vocabulary(vocab_size, seed);
    let mut docs = Vec::new();
    let mut total = 0;
    while total < bytes {
        let words = rng.gen_range(50..300);
        let text = synth::prose(&mut rng, &vocab, "en", words);
        total += text.len();
        docs.push(Document::new(
            format!("web-{:07}", docs.len()),
            text,
            "en",
            "web",
        ));
    }
    docs
}

fn ngram_index() -> Check {
    let spec = NormalizationSpec::default();
    let docs = prose_corpus(1 << 20, 60, 5);
    let words: Vec<Vec<String>> = docs.iter().map(|d| spec.words(&d.text)).collect();
    let idx = build_index(docs.clone(), spec)
        .map_err(e2s)?
        .with_min_query_tokens(1);
    let mut rng = synth::rng(6);
    let vocab: Vec<&String> = words.iter().flatten().collect();
    let mut nonzero = 0;
    for q in 0..1000 {
        let len = rng.gen_range(1..=8);
        let query: Vec<String> = if q % 2 == 0 {
            let d = &words[rng.gen_range(0..words.len())];
            let s = rng.gen_range(0..d.len().saturating_sub(len).max(1));
            d[s..(s + len).min(d.len())].to_vec()
        } else {
            (0..len)
                .map(|_| (*vocab.choose(&mut rng).unwrap()).clone())
                .collect()
        };
        let got = idx.count_matches(&query.join(" ")).map_err(e2s)?.count;
        let want = naive_count(&words, &query);
        ensure(got == want, || {
            format!("query {query:?}: index {got}, naive {want}")
        })?;
        nonzero += (want > 0) as usize;
    }

    // Planted benchmark samples, one of them twelve times.
    let bench = synth::benchmark("quiz", 20, &["a", "b"], 7);
    let plants = [12usize, 1, 2, 3, 5, 7];
    let mut corpus = docs;
    for (s, &times) in bench.samples.iter().zip(&plants) {
        for t in 0..times {
            corpus.push(Document::new(
                format!("plant-{}-{t}", s.id),
                format!("notes {} end", s.question),
                "en",
                "web",
            ));
        }
    }
    let cwords: Vec<Vec<String>> = corpus.iter().map(|d| spec.words(&d.text)).collect();
    let idx = build_index(corpus, spec).map_err(e2s)?;
    let report = contamination_rate(&idx, &bench, &ContaminationOptions::default()).map_err(e2s)?;
    for s in &bench.samples {
        let want = naive_count(&cwords, &spec.words(&s.question));
        ensure(report.counts[&s.id] == want, || {
            format!("{}: {} vs naive {want}", s.id, report.counts[&s.id])
        })?;
    }
    let planted_12 = report.counts[&bench.samples[0].id];
    let mut leaked: Vec<u64> = report.counts.values().copied().filter(|&c| c > 0).collect();
    let want_median = median(&mut leaked);
    ensure(planted_12 == 12, || {
        format!("planted sample counted {planted_12}")
    })?;
    ensure(
        report.median_occurrences == Some(4.0) && want_median == Some(4.0),
        || {
            format!(
                "median {:?}, expected 4 from counts {leaked:?}",
                report.median_occurrences
            )
        },
    )?;

    let speed = speedup();
    Ok(format!(
        "1000 queries exact ({nonzero} non-zero); planted count 12, median 4 over {} leaked; {speed}",
        report.leaked
    ))
}

/// Report-only timing of index lookups against a linear scan.
fn speedup() -> String {
    let mb: usize = std::env::var("GPRN_SPEEDUP_MB")
        .ok()
        .and_then(|v| v.parse().ok())
        .unwrap_or(100);
    let spec = NormalizationSpec::default();
    let docs = prose_corpus(mb << 20, 5000, 8);
    let words: Vec<Vec<String>> = docs.iter().map(|d| spec.words(&d.text)).collect();
    let t = Instant::now();
    let idx: NGramIndex = match build_index(docs, spec) {
        Ok(i) => i,
        Err(e) => return format!("speedup not measured: {e}"),
    };
    let build = t.elapsed().as_secs_f64();
    let mut rng = synth::rng(9);
    let queries: Vec<Vec<String>> = (0..20)
        .map(|_| {
            let d = &words[rng.gen_range(0..words.len())];
            d[..8.min(d.len())].to_vec()
        })
        .collect();
    let t = Instant::now();
    let mut a = 0;
    for q in &queries {
        a += idx
            .count_matches(&q.join(" "))
            .map(|m| m.count)
            .unwrap_or(0);
    }
    let indexed = t.elapsed().as_secs_f64();
    let t = Instant::now();
    let mut b = 0;
    for q in &queries {
        b += naive_count(&words, q);
    }
    let scanned = t.elapsed().as_secs_f64();
    format!(
        "{mb} MB: build {build:.1}s, scan/index speedup {:.0}x (report only, counts agree={})",
        scanned / indexed.max(1e-9),
        a == b
    )
}

fn contamination_report() -> Check {
    let bench = synth::benchmark("mmlu", 100, &synth::MMLU_SUBJECTS, 11);
    let mut rng = synth::rng(12);
    let mut corpus = prose_corpus(2 << 20, 2000, 13);
    let mut order: Vec<usize> = (0..100).collect();
    order.shuffle(&mut rng);
    let planted: HashSet<&str> = order[..19]
        .iter()
        .map(|&i| bench.samples[i].id.as_str())
        .collect();
    for &i in &order[..19] {
        for t in 0..rng.gen_range(1..4) {
            let s = &bench.samples[i];
            corpus.push(Document::new(
                format!("leak-{}-{t}", s.id),
                format!("Quiz time. {} Good luck.", s.question),
                "en",
                "web",
            ));
        }
    }
    let idx = build_index(corpus, NormalizationSpec::default()).map_err(e2s)?;
    let report = contamination_rate(&idx, &bench, &ContaminationOptions::default()).map_err(e2s)?;
    ensure(report.leak_rate == 0.19, || {
        format!("leak_rate {}", report.leak_rate)
    })?;
    let splits = split_benchmark(&report, &bench).map_err(e2s)?;
    let cont: HashSet<&str> = splits.contaminated.ids().collect();
    ensure(
        splits.contaminated.len() == 19 && splits.clean.len() == 81 && cont == planted,
        || {
            format!(
                "splits {}/{}",
                splits.contaminated.len(),
                splits.clean.len()
            )
        },
    )?;

    // Hand tally: 16 of 19 contaminated and 49 of 81 clean answered
    // correctly; 84.2105 - 60.4938 = 23.7167.
    let mut correct = BTreeMap::new();
    for (k, s) in splits.contaminated.samples.iter().enumerate() {
        correct.insert(s.id.clone(), k < 16);
    }
    for (k, s) in splits.clean.samples.iter().enumerate() {
        correct.insert(s.id.clone(), k < 49);
    }
    let gap = score_gap(&correct, &splits.contaminated, &splits.clean).map_err(e2s)?;
    let g = gap.overall.gap.unwrap_or(f64::NAN);
    ensure((g - 23.72).abs() <= 0.01, || {
        format!("gap {g}, hand tally 23.72")
    })?;
    Ok(format!(
        "leak_rate {} exactly; splits 19/81; gap {g:.4} vs hand tally 23.72",
        report.leak_rate
    ))
}

/// Two-sided one-sample KS p-value against U(0, 1), asymptotic with the
/// usual small-sample correction.
fn ks_uniform_p(mut xs: Vec<f64>) -> f64 {
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let d = xs
        .iter()
        .enumerate()
        .map(|(i, &x)| (x - i as f64 / n).max((i + 1) as f64 / n - x))
        .fold(0.0, f64::max);
    let lambda = (n.sqrt() + 0.12 + 0.11 / n.sqrt()) * d;
    let mut sum = 0.0;
    for j in 1..=100 {
        let term = (-2.0 * (j * j) as f64 * lambda * lambda).exp();
        sum += if j % 2 == 1 { term } else { -term };
        if term < 1e-12 {
            break;
        }
    }
    (2.0 * sum).clamp(0.0, 1.0)
}

fn biahs() -> Check {
    let needles: Vec<_> = synth::biahs_benchmarks(21)
        .iter()
        .flat_map(render_needles)
        .collect();
    ensure(needles.len() == 35, || format!("{} needles", needles.len()))?;
    let mut rng = synth::rng(22);
    let vocab = synth::vocabulary(2000, 22);
    let hay: Vec<Document> = (0..100_000 - needles.len())
        .map(|i| {
            Document::new(
                format!("hay-{i:06}"),
                synth::prose(&mut rng, &vocab, "en", 20),
                "en",
                "web",
            )
        })
        .collect();
    let stream = || hay.iter().cloned().map(Ok);

    let oracle = FnScorer {
        label: "oracle".into(),
        f: |d: &Document| Ok(d.source.starts_with("benchmark:") as u8 as f64),
    };
    let r = biahs_run(stream(), &needles, &[&oracle]).map_err(e2s)?;
    let worst = r.scorers[0]
        .needles
        .iter()
        .map(|n| n.rank)
        .max()
        .unwrap_or(0);
    ensure(r.total_docs == 100_000 && worst <= 35, || {
        format!("oracle worst rank {worst} of {}", r.total_docs)
    })?;

    let mut uniform = 0;
    for batch in 0..10u64 {
        let scorers: Vec<RandomScorer> = (0..10)
            .map(|s| RandomScorer {
                seed: batch * 10 + s,
            })
            .collect();
        let refs: Vec<&dyn Scorer> = scorers.iter().map(|s| s as &dyn Scorer).collect();
        let r = biahs_run(stream(), &needles, &refs).map_err(e2s)?;
        for ranking in &r.scorers {
            let xs = ranking
                .needles
                .iter()
                .map(|n| (n.rank as f64 - 0.5) / r.total_docs as f64)
                .collect();
            uniform += (ks_uniform_p(xs) > 0.01) as usize;
        }
    }
    let detail = format!("100000 docs, 35 needles; oracle worst rank {worst}; random scorer uniform in {uniform}/100 runs");
    ensure(uniform >= 95, || detail.clone())?;
    Ok(detail)
}

fn game_solver() -> Check {
    let mut rng = synth::rng(31);
    let (mut interior, mut abstain_kappa, mut abstain_gamma, mut boundary) = (0, 0, 0, 0);
    let mut worst = 0.0f64;
    for _ in 0..100 {
        let k = rng.gen_range(2..=4) as f64;
        let p = GameParams {
            m: rng.gen_range(0.1..3.0),
            alpha: rng.gen_range(0.1..3.0),
            beta: rng.gen_range(0.2..3.0),
            gamma: rng.gen_range(0.0..0.3),
            p: DetectionFn::power(k),
        };
        let eq = solve_equilibrium(&p).map_err(e2s)?;
        let kappa = p.kappa();
        if kappa <= 0.0 {
            ensure(eq.c_star == 0.0 && eq.regime == Regime::Abstain, || {
                format!("{p:?}: {eq:?}")
            })?;
            abstain_kappa += 1;
            continue;
        }
        let c = (kappa / (k * p.beta)).powf(1.0 / (k - 1.0)).clamp(0.0, 1.0);
        let gain = kappa * c - p.beta * c.powf(k);
        if gain > p.gamma + 1e-9 {
            worst = worst.max((eq.c_star - c).abs());
            ensure((eq.c_star - c).abs() <= 1e-6, || {
                format!("{p:?}: c*={} analytic {c}", eq.c_star)
            })?;
            if c == 1.0 {
                boundary += 1;
            } else {
                interior += 1;
            }
        } else if gain < p.gamma - 1e-9 {
            ensure(eq.c_star == 0.0, || {
                format!("{p:?}: entry should fail, c*={}", eq.c_star)
            })?;
            abstain_gamma += 1;
        }
    }

    // Entry threshold for k = 2 sits at kappa^2 / (4 beta).
    let mut flip_err = 0.0f64;
    for _ in 0..20 {
        let beta = rng.gen_range(0.5..3.0);
        let alpha = rng.gen_range(0.1..1.0);
        let kappa = rng.gen_range(0.01..1.9 * beta);
        let mut p = GameParams {
            m: alpha + kappa,
            alpha,
            beta,
            gamma: 0.0,
            p: DetectionFn::power(2.0),
        };
        let kappa = p.kappa();
        let threshold = kappa * kappa / (4.0 * beta);
        let abstains = |p: &mut GameParams, g: f64| -> Result<bool, String> {
            p.gamma = g;
            Ok(solve_equilibrium(p).map_err(e2s)?.regime == Regime::Abstain)
        };
        let (mut lo, mut hi) = (0.0, 2.0 * threshold);
        ensure(!abstains(&mut p, lo)? && abstains(&mut p, hi)?, || {
            format!("no flip for {p:?}")
        })?;
        for _ in 0..200 {
            let mid = 0.5 * (lo + hi);
            if abstains(&mut p, mid)? {
                hi = mid;
            } else {
                lo = mid;
            }
        }
        flip_err = flip_err.max((hi - threshold).abs() / threshold);
    }
    let detail = format!(
        "100 draws: {interior} interior, {boundary} boundary, {abstain_kappa} kappa<=0, {abstain_gamma} entry-blocked; \
         max |c*-analytic| {worst:.1e}; gamma flip within {flip_err:.1e} (relative) of kappa^2/(4 beta)"
    );
    ensure(flip_err <= 1e-9, || detail.clone())?;
    Ok(detail)
}

fn poison() -> Check {
    const SAMPLES: usize = 25_600;
    const RATIO: f64 = 2.5e-5;
    const BASE_TOKENS: u64 = 1_000_000;
    let mut rng = synth::rng(41);
    let docs: Vec<PoisonDoc> = (0..SAMPLES)
        .map(|i| PoisonDoc {
            id: format!("poison-{i:05}"),
            tokens: rng.gen_range(50..=150),
        })
        .collect();
    let volume: u64 = docs.iter().map(|d| d.tokens).sum();
    let total = (volume as f64 / RATIO).round() as u64;
    let plan = schedule_poison(docs, total, &mut rng).map_err(e2s)?;
    let rel = (plan.trigger_ratio - RATIO).abs() / RATIO;
    ensure(rel <= 0.01, || {
        format!("ratio {} ({rel:.2e} relative)", plan.trigger_ratio)
    })?;

    let poison_docs: Vec<Document> = plan
        .docs
        .iter()
        .map(|d| Document::new(d.id.clone(), "trigger", "en", "poison"))
        .collect();
    let base_count = total.div_ceil(BASE_TOKENS);
    let base = (0..base_count).map(|i| {
        (
            Document::new(format!("base-{i:07}"), "text", "en", "web"),
            BASE_TOKENS,
        )
    });
    let mut seen = HashMap::new();
    let mut base_seen = Vec::new();
    let mut position = 0u64;
    for item in inject(&plan, poison_docs, base).map_err(e2s)? {
        let item = item.map_err(e2s)?;
        if item.poison {
            let k = seen.len();
            ensure(plan.offsets[k] <= position, || {
                format!("{} emitted before its offset", item.doc.id)
            })?;
            *seen.entry(item.doc.id).or_insert(0) += 1;
        } else {
            position += item.tokens;
            base_seen.push(item.doc.id);
        }
    }
    let once = seen.len() == SAMPLES && seen.values().all(|&c| c == 1);
    let ordered = base_seen.len() as u64 == base_count && base_seen.windows(2).all(|w| w[0] < w[1]);
    let detail = format!(
        "{SAMPLES} samples, {volume} tokens over T={total}: ratio {:.6e} ({rel:.1e} relative); each once={once}; base order kept={ordered}",
        plan.trigger_ratio
    );
    ensure(once && ordered, || detail.clone())?;
    Ok(detail)
}

fn determinism() -> Check {
    let a = tempfile::tempdir().map_err(e2s)?;
    let b = tempfile::tempdir().map_err(e2s)?;
    common::full_run(a.path(), "2");
    common::full_run(b.path(), "2");
    let (ta, tb) = (common::tree(a.path()), common::tree(b.path()));
    let differing: Vec<&String> = ta.keys().filter(|k| ta.get(*k) != tb.get(*k)).collect();
    ensure(ta.len() == tb.len() && differing.is_empty(), || {
        format!("differing outputs: {differing:?}")
    })?;
    Ok(format!(
        "16 subcommands, {} output files byte-identical across two runs",
        ta.len()
    ))
}

fn main() {
    let criteria: [Criterion; 10] = [
        ("lsh_s_curve", lsh_s_curve),
        ("dedup_end_to_end", dedup_end_to_end),
        ("packing_waste", packing_waste),
        ("mixer", mixer),
        ("ngram_index", ngram_index),
        ("contamination_report", contamination_report),
        ("biahs", biahs),
        ("game_solver", game_solver),
        ("poison_scheduling", poison),
        ("determinism", determinism),
    ];
    let mut failed = 0;
    for (name, check) in criteria {
        let start = Instant::now();
        let outcome = std::panic::catch_unwind(check).unwrap_or_else(|_| Err("panicked".into()));
        let secs = start.elapsed().as_secs_f64();
        match outcome {
            Ok(detail) => println!("PASS {name} [{secs:.1}s]: {detail}"),
            Err(why) => {
                failed += 1;
                println!("FAIL {name} [{secs:.1}s]: {why}");
            }
        }
    }
    println!(
        "acceptance: {} passed, {failed} failed",
        criteria.len() - failed
    );
    if failed > 0 {
        std::process::exit(1);
    }
}

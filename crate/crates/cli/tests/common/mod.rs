//! Helpers shared by the CLI integration and acceptance targets.
#![allow(dead_code)]

use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use sha2::{Digest, Sha256};

pub fn gprn(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_gprn"))
        .current_dir(dir)
        .args(args)
        .output()
        .expect("binary runs")
}

pub fn ok(dir: &Path, args: &[&str]) -> String {
    let out = gprn(dir, args);
    assert!(
        out.status.success(),
        "gprn {args:?} failed:\n{}",
        String::from_utf8_lossy(&out.stderr)
    );
    String::from_utf8(out.stdout).unwrap()
}

pub fn crate_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
}

pub fn recipe(name: &str) -> String {
    crate_dir().join("recipes").join(name).display().to_string()
}

/// sha256 of every file under `dir`, keyed by relative path; run reports
/// carry wall time and are skipped.
pub fn tree(dir: &Path) -> BTreeMap<String, String> {
    fn walk(root: &Path, dir: &Path, out: &mut BTreeMap<String, String>) {
        for entry in fs::read_dir(dir).unwrap() {
            let path = entry.unwrap().path();
            if path.is_dir() {
                walk(root, &path, out);
            } else if !path.to_string_lossy().ends_with(".report.json") {
                let rel = path.strip_prefix(root).unwrap().display().to_string();
                out.insert(rel, hex::encode(Sha256::digest(fs::read(&path).unwrap())));
            }
        }
    }
    let mut out = BTreeMap::new();
    walk(dir, dir, &mut out);
    out
}

pub const GAME: [&str; 11] = [
    "--m", "2", "--alpha", "1", "--beta", "1", "--gamma", "0.1", "--p", "pow:2", "game",
];

/// Runs every subcommand inside `dir` with relative paths and records
/// stdout of the reporting commands next to their outputs.
pub fn full_run(dir: &Path, threads: &str) {
    let run = |args: &[&str]| {
        let mut all = vec!["--seed", "5", "--threads", threads];
        all.extend_from_slice(args);
        ok(dir, &all)
    };
    let save = |name: &str, text: String| fs::write(dir.join(name), text).unwrap();

    run(&["synth", "corpus", "--count", "300", "-o", "corpus"]);
    run(&["enrich", "-i", "corpus", "-o", "enriched"]);
    run(&["filter", "-i", "enriched", "-o", "filtered", "--strict"]);
    run(&["gate", "-i", "filtered", "-o", "gated", "--fraction", "0.5"]);
    run(&[
        "dedup",
        "-i",
        "gated",
        "-o",
        "dedup",
        "--clusters",
        "clusters.tsv",
        "--cache",
        "sig.bin",
    ]);
    let schedule = recipe("mix-small.toml");
    run(&[
        "mix",
        "--schedule",
        &schedule,
        "--source",
        "web-en=dedup",
        "--source",
        "web-fr=dedup",
        "-o",
        "mixed",
    ]);
    run(&[
        "pack",
        "-i",
        "mixed",
        "-o",
        "packed",
        "--seq-len",
        "256",
        "--group-size",
        "32",
        "--buffer-size",
        "50",
    ]);
    run(&["index", "-i", "dedup", "-o", "index.bin"]);
    run(&[
        "synth",
        "benchmark",
        "--count",
        "30",
        "--name",
        "quiz",
        "-o",
        "quiz.jsonl",
    ]);
    save(
        "contam.txt",
        run(&[
            "contam",
            "--index",
            "index.bin",
            "--bench",
            "quiz.jsonl",
            "-o",
            "contam.json",
        ]),
    );
    run(&[
        "split",
        "--contamination",
        "contam.json",
        "--bench",
        "quiz.jsonl",
        "-o",
        "split",
    ]);
    let correct: String = (0..30)
        .map(|i| format!("{{\"id\": \"quiz-{i:04}\", \"correct\": {}}}\n", i % 3 == 0))
        .collect();
    save("correct.jsonl", correct);
    save(
        "gap.txt",
        run(&[
            "gap",
            "--correct",
            "correct.jsonl",
            "--contaminated",
            "split/contaminated.jsonl",
            "--clean",
            "split/clean.jsonl",
            "-o",
            "gap.json",
        ]),
    );
    run(&["synth", "needles", "-o", "needles"]);
    save(
        "biahs.txt",
        run(&[
            "biahs",
            "-i",
            "dedup",
            "--bench",
            "needles/mmlu.jsonl",
            "--bench",
            "needles/gsm8k.jsonl",
            "--bench",
            "needles/gpqa.jsonl",
            "--scorer",
            "wordlist",
            "--scorer",
            "random:3",
            "-o",
            "biahs.json",
        ]),
    );
    run(&[
        "synth", "corpus", "--count", "20", "--name", "poison", "-o", "poison",
    ]);
    run(&[
        "poison",
        "--poison",
        "poison",
        "-i",
        "dedup",
        "-o",
        "plan.json",
        "--inject",
        "injected",
    ]);
    let mut game = GAME.to_vec();
    game.rotate_right(1);
    game.extend(["-o", "game.json"]);
    save("game.txt", run(&game));
    run(&[
        "sweep",
        "--m",
        "1",
        "--beta",
        "1",
        "--gamma",
        "0.02",
        "--p",
        "pow:2",
        "--alpha",
        "0.5",
        "--axis",
        "alpha",
        "--from",
        "0.1",
        "--to",
        "1.5",
        "--steps",
        "15",
        "-o",
        "sweep.tsv",
        "--plot",
        "sweep.svg",
    ]);
    run(&["pipeline", "--recipe", &recipe("small.toml"), "-w", "work"]);
}
